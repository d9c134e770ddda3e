"""Drive simulations from a RunConfig and emit CSV / SVG artifacts.

Column layout is fixed: ``t`` first, then the columns of each requested
observable in declared order.  Floats are printed with ``repr`` (shortest
round-trip form), so re-parsing an emitted CSV reproduces the in-memory
series exactly and reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .core import DensityMatrix, basis_ket
from .jc import (
    build_jc,
    closed_form_block,
    excitation_number,
    excited_population,
    jc_initial,
    jc_space,
    two_qubit_projection,
    wootters_concurrence,
)
from .master_equation import MasterEquation, integrate
from .svgplot import emit_svg
from .trajectories import mcwf_unravel, reconstruct, solve_hierarchy

__all__ = [
    "build_model",
    "simulate_config",
    "observable_columns",
    "write_csv",
    "read_csv",
    "run_to_files",
    "sweep_to_files",
]

CONDITIONAL_FLOOR = 1e-12


def build_model(cfg: RunConfig) -> MasterEquation:
    me = build_jc(cfg.params)
    if cfg.model == "custom-tensor":
        me = MasterEquation(
            H_S=me.H_S,
            couplings=me.couplings,
            tensor=cfg.tensor,
            H_LS=me.H_LS,
            temperature_mode="zero",
        )
    return me


def _initial_ket(cfg: RunConfig):
    p = cfg.params
    space = jc_space(p)
    if p.n_exc == 0:
        return basis_ket(space, (1, 0))
    if cfg.initial == "atom":
        return basis_ket(space, (0, p.n_exc - 1))
    if cfg.initial == "photon":
        return basis_ket(space, (1, p.n_exc))
    raise ConfigError("initial: mcwf needs a pure initial state (atom or photon)")


def _closed_form_states(cfg: RunConfig, grid: np.ndarray) -> list[DensityMatrix]:
    p = cfg.params
    space = jc_space(p)
    if p.n_exc == 0:
        g = basis_ket(space, (1, 0)).projector()
        return [g for _ in grid]
    block = closed_form_block(p, 1, grid, initial=cfg.initial)
    n_ph = space.factor_dims[1]
    i1, i2, ig = 0, n_ph + 1, n_ph  # |+,0>, |-,1>, |-,0>
    out = []
    for k in range(len(grid)):
        m = np.zeros((space.total_dim, space.total_dim), dtype=complex)
        r11 = block.rho11[k].real
        r22 = block.rho22[k].real
        m[i1, i1] = r11
        m[i1, i2] = block.rho12[k]
        m[i2, i1] = np.conj(block.rho12[k])
        m[i2, i2] = r22
        m[ig, ig] = 1.0 - r11 - r22
        out.append(DensityMatrix(space, m, tolerance=1e-7))
    return out


def simulate_config(cfg: RunConfig) -> list[DensityMatrix]:
    """Produce the state series for a config with the selected engine."""
    grid = cfg.grid.times()
    if cfg.engine == "closed-form":
        return _closed_form_states(cfg, grid)
    me = build_model(cfg)
    if cfg.engine == "integrate":
        return integrate(me, jc_initial(cfg.params, cfg.initial), grid)
    if cfg.engine == "hierarchy":
        space = jc_space(cfg.params)
        h = solve_hierarchy(
            me, jc_initial(cfg.params, cfg.initial), grid, excitation_number(space)
        )
        return reconstruct(h, space=space)
    if cfg.engine == "mcwf":
        res = mcwf_unravel(
            me,
            _initial_ket(cfg),
            grid,
            n_traj=cfg.mcwf.n_traj,
            seed=cfg.mcwf.seed,
        )
        return res.states(jc_space(cfg.params))
    raise ConfigError(f"engine: unhandled engine {cfg.engine!r}")


def _sector_kets(space, i: int) -> tuple[int, int]:
    n_ph = space.factor_dims[1]
    return i - 1, n_ph + i  # flat indices of |i-1 photons, +> and |i photons, ->


def _block_entries(m: np.ndarray, space, i: int) -> tuple[float, complex, float]:
    a, b = _sector_kets(space, i)
    return float(m[a, a].real), complex(m[a, b]), float(m[b, b].real)


def observable_columns(
    cfg: RunConfig, states: list[DensityMatrix]
) -> list[tuple[str, np.ndarray]]:
    """Expand the requested observables into named columns."""
    p = cfg.params
    space = jc_space(p)
    n_t = len(states)
    cols: list[tuple[str, np.ndarray]] = []
    for name in cfg.outputs:
        if name == "population":
            cols.append(
                ("population", np.array([excited_population(s, space) for s in states]))
            )
        elif name == "trace":
            cols.append(("trace", np.array([s.trace for s in states])))
        elif name == "purity":
            cols.append(("purity", np.array([s.purity() for s in states])))
        elif name == "concurrence":
            full = np.empty(n_t)
            cond = np.empty(n_t)
            for k, s in enumerate(states):
                two = two_qubit_projection(s, space)
                full[k] = wootters_concurrence(two)
                r11, r12, r22 = _block_entries(s.matrix, space, 1)
                w = r11 + r22
                if w > CONDITIONAL_FLOOR:
                    cond[k] = 2.0 * abs(r12) / w
                else:
                    cond[k] = float("nan")
            cols.append(("concurrence", full))
            cols.append(("concurrence_conditional", cond))
        elif name == "blocks":
            cols.append(
                (
                    "block0_p00",
                    np.array(
                        [float(s.matrix[space.factor_dims[1], space.factor_dims[1]].real)
                         for s in states]
                    ),
                )
            )
            for i in range(1, p.n_exc + 1):
                entries = [_block_entries(s.matrix, space, i) for s in states]
                cols.append((f"block{i}_p11", np.array([e[0] for e in entries])))
                cols.append((f"block{i}_re_p12", np.array([e[1].real for e in entries])))
                cols.append((f"block{i}_im_p12", np.array([e[1].imag for e in entries])))
                cols.append((f"block{i}_p22", np.array([e[2] for e in entries])))
        elif name == "conditional-state":
            top = p.n_exc
            p11 = np.empty(n_t)
            re12 = np.empty(n_t)
            im12 = np.empty(n_t)
            p22 = np.empty(n_t)
            for k, s in enumerate(states):
                r11, r12, r22 = _block_entries(s.matrix, space, top)
                w = r11 + r22
                if w > CONDITIONAL_FLOOR:
                    p11[k], p22[k] = r11 / w, r22 / w
                    re12[k], im12[k] = (r12 / w).real, (r12 / w).imag
                else:
                    p11[k] = re12[k] = im12[k] = p22[k] = float("nan")
            cols.append(("cond_p11", p11))
            cols.append(("cond_re_p12", re12))
            cols.append(("cond_im_p12", im12))
            cols.append(("cond_p22", p22))
        else:
            raise ConfigError(f"outputs: unhandled observable {name!r}")
    return cols


def write_csv(path: Path, t: np.ndarray, cols: list[tuple[str, np.ndarray]]):
    lines = ["t," + ",".join(name for name, _ in cols)]
    for k in range(len(t)):
        row = [repr(float(t[k]))]
        row.extend(repr(float(col[k])) for _, col in cols)
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Parse an emitted CSV back into (header, columns-as-rows array)."""
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def _emit(
    cfg: RunConfig,
    out_dir: Path,
    base: str,
    fmt: str,
) -> list[Path]:
    grid = cfg.grid.times()
    states = simulate_config(cfg)
    cols = observable_columns(cfg, states)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        csv_path = out_dir / f"{base}.csv"
        write_csv(csv_path, grid, cols)
        written.append(csv_path)
    if fmt in ("svg", "both"):
        svg_path = out_dir / f"{base}.svg"
        svg_path.write_text(
            emit_svg(grid, cols, title=base, xlabel="t"),
            encoding="utf-8",
            newline="\n",
        )
        written.append(svg_path)
    return written


def run_to_files(cfg: RunConfig, out_dir: Path, base: str, fmt: str = "both") -> list[Path]:
    """Single simulation; returns the artifact paths."""
    if cfg.sweep is not None:
        raise ConfigError("sweep: config declares a sweep; use the sweep subcommand")
    return _emit(cfg, out_dir, base, fmt)


def sweep_to_files(cfg: RunConfig, out_dir: Path, base: str, fmt: str = "both") -> list[Path]:
    """One run per sweep value; file names carry a ``_<param>_<value>`` suffix."""
    if cfg.sweep is None:
        raise ConfigError("sweep: config declares no sweep")
    written = []
    for value in cfg.sweep.values:
        try:
            params = dataclasses.replace(cfg.params, **{cfg.sweep.param: value})
        except ValueError as exc:
            raise ConfigError(f"sweep.values: params.{cfg.sweep.param} = {value!r}: {exc}") from exc
        point = dataclasses.replace(cfg, params=params, sweep=None)
        written.extend(_emit(point, out_dir, f"{base}_{cfg.sweep.param}_{value!r}", fmt))
    return written
