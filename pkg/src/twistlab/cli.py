"""Command-line front end and experiment orchestration.

Every subcommand reads a strict config file, derives all randomness from
the named seeds in it, and writes machine-readable CSV/JSON outputs that
embed the config echo and the surface-file hash.  Exit codes: 0 success,
2 partial per-item failures (scans), 1 fatal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import beurling as beurling_mod
from . import cohosolve, product, spectral, twisted
from .config import ExperimentConfig, parse_config, require
from .errors import CacheError, TwistlabError
from .grid import Grid, assemble_Q, assemble_S, assemble_T
from .origami import parse_surface_file, surface_file_hash
from .output import write_csv, write_json

log = logging.getLogger("twistlab")


class Workspace:
    """Lazily assembled shared state for one command invocation."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path, threads: int):
        self.cfg = cfg
        self.out_dir = out_dir
        self.threads = threads
        self.surface_path = require(cfg, "surface", "file")
        base = Path(cfg.path).parent if cfg.path else Path(".")
        path = Path(self.surface_path)
        if not path.is_absolute():
            path = base / path
        self.origami = parse_surface_file(path)
        self.surface_hash = surface_file_hash(path)
        self.grid = Grid(self.origami, cfg.get("grid", "m"))
        self._ops = None
        self._basis = None

    @property
    def ops(self):
        if self._ops is None:
            S = assemble_S(self.grid)
            T = assemble_T(self.grid)
            self._ops = (S, T, assemble_Q(S, T))
        return self._ops

    def provenance(self):
        import json as _json

        return {
            "surface_sha256": self.surface_hash,
            "config": _json.dumps(self.cfg.echo(), sort_keys=True),
        }

    def eigenbasis(self):
        if self._basis is not None:
            return self._basis, "memory"
        k = self.cfg.get("eigen", "k")
        tol = self.cfg.get("eigen", "tol")
        seed = self.cfg.get("eigen", "seed")
        cache = self.out_dir / spectral.cache_key(self.surface_hash, self.grid.m, k, tol, seed)
        _, _, Q = self.ops
        if cache.exists():
            try:
                basis = spectral.load_eigenbasis(cache, self.grid, tol=tol, seed=seed)
                basis.residual_bound = spectral.basis_residual(Q, basis)
                self._basis = basis
                log.info("eigenbasis cache hit: %s", cache.name)
                return self._basis, "cache"
            except CacheError as exc:
                log.warning("cache rejected (%s); recomputing", exc)
        self._basis = spectral.lowest_eigenpairs(Q, k, tol, self.grid, seed=seed)
        spectral.save_eigenbasis(cache, self._basis)
        return self._basis, "computed"

    def data_field(self):
        d = self.cfg["data"]
        kind = d["kind"]
        if kind == "constant":
            return (d["re"] + 1j * d["im"]) * self.grid.ones()
        if kind == "mode":
            return self.grid.sample(
                lambda s, x, y: np.exp(2j * np.pi * (d["k"] * x + d["l"] * y))
            )
        if kind == "random":
            rng = np.random.default_rng(d["seed"])
            kmax, n_modes = d["kmax"], d["n_modes"]
            f = self.grid.zeros()
            for _ in range(n_modes):
                k = int(rng.integers(-kmax, kmax + 1))
                l = int(rng.integers(-kmax, kmax + 1))
                c = rng.standard_normal() + 1j * rng.standard_normal()
                f += c * self.grid.sample(
                    lambda s, x, y, k=k, l=l: np.exp(2j * np.pi * (k * x + l * y))
                )
            return f
        raise TwistlabError(f"unknown data kind {kind!r}")

    def solve_config(self, **over):
        s = self.cfg["solve"]
        base = dict(
            theta=s["theta"], sigma=s["sigma"], twist_mode=s["twist_mode"],
            method=s["method"], lsq_tol=s["lsq_tol"], rank_tol=s["rank_tol"],
            sobolev_r=s["r"], sobolev_s=s["s"], obstruction=s["obstruction"],
        )
        base.update(over)
        return cohosolve.SolveConfig(**base)


def cmd_spectrum(ws: Workspace):
    basis, origin = ws.eigenbasis()
    log.info("eigenbasis origin: %s", origin)
    rows = [(idx, float(ev)) for idx, ev in enumerate(basis.eigenvalues)]
    write_csv(ws.out_dir / "eigenvalues.csv", ["index", "eigenvalue"], rows,
              provenance=ws.provenance())
    write_json(ws.out_dir / "spectrum.json", {
        "k": basis.k,
        "residual_bound": basis.residual_bound,
        "lambda_max": float(basis.eigenvalues[-1]),
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 0


def cmd_weyl(ws: Workspace):
    basis, _ = ws.eigenbasis()
    top = 0.9 * basis.eigenvalues[-1]
    lams = np.linspace(top / 10.0, top, 24)
    rows = []
    for lam in lams:
        rep = spectral.weyl_ratio(basis, float(lam))
        rows.append((float(lam), rep["count"], rep["ratio"]))
    fit = spectral.weyl_slope(basis, lams)
    write_csv(ws.out_dir / "weyl.csv", ["lambda", "count", "ratio"], rows,
              provenance=ws.provenance())
    write_json(ws.out_dir / "weyl.json", {
        "slope": fit["slope"], "intercept": fit["intercept"], "r2": fit["r2"],
        "area": ws.origami.area,
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 0


def cmd_solve(ws: Workspace):
    S, T, _ = ws.ops
    cfg = ws.solve_config()
    f = ws.data_field()
    basis = None
    needs_basis = any(
        v is not None and not float(v).is_integer() for v in (cfg.sobolev_r, cfg.sobolev_s)
    )
    if needs_basis:
        basis, _ = ws.eigenbasis()
    if cfg.method == "resolvent":
        U = beurling_mod.extend_unitary(S, T, cfg.sigma,
                                        j_seed=ws.cfg.get("beurling", "j_seed"),
                                        rank_tol=cfg.rank_tol)
        rep = cohosolve.solve_resolvent(f, S, T, U, cfg, ws.grid, basis=basis)
    else:
        rep = cohosolve.solve_lsq(f, S, T, cfg, ws.grid, basis=basis)
    write_json(ws.out_dir / "solve.json", {
        "residual": rep.residual,
        "obstruction_dim": rep.obstruction_dim,
        "obstruction_mass": rep.obstruction_mass,
        "norm_u_r": rep.norm_u_r,
        "norm_f_s": rep.norm_f_s,
        "ratio": rep.ratio,
        "method": rep.method,
        "twist": rep.twist,
        "solution_head": [complex(v) for v in rep.solution[:8]],
        "solution_norm": ws.grid.norm(rep.solution),
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 0


def cmd_scan(ws: Workspace):
    S, T, _ = ws.ops
    sc = ws.cfg["scan"]
    cfg = ws.solve_config(sigma=sc["sigma"], obstruction=sc["obstruction"])
    count = sc["theta_count"]
    thetas = (np.arange(count) + 0.5) * (2.0 * np.pi / count)
    f = ws.data_field()
    basis = None
    if any(v is not None and not float(v).is_integer()
           for v in (cfg.sobolev_r, cfg.sobolev_s)):
        basis, _ = ws.eigenbasis()
    result = cohosolve.theta_scan(f, cfg.sigma, thetas, cfg, ws.grid, S, T, basis=basis,
                                  p_values=sc["p_values"], threads=ws.threads)
    rows = [
        (r.theta, r.ratio, r.obstruction_dim, r.residual, r.method, r.error or "")
        for r in result.rows
    ]
    write_csv(ws.out_dir / "scan.csv",
              ["theta", "ratio", "obstruction_dim", "residual", "method", "error"],
              rows, provenance=ws.provenance())
    write_json(ws.out_dir / "scan.json", {
        "p_stats": {repr(p): v for p, v in result.p_stats.items()},
        "norm_f_s": result.norm_f_s,
        "flags": result.flags,
        "defects": sum(1 for r in result.rows if r.error),
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 2 if any(r.error for r in result.rows) else 0


def cmd_invariants(ws: Workspace):
    S, T, _ = ws.ops
    cfg = ws.solve_config()
    L = cohosolve.assemble_Ltheta(S, T, cfg)
    info = cohosolve.invariant_distributions(L, rank_tol=cfg.rank_tol)
    write_json(ws.out_dir / "invariants.json", {
        "dim": info.dim,
        "threshold": info.threshold,
        "smax": info.smax,
        "svals_below": list(map(float, info.svals_below)),
        "sval_above": info.sval_above,
        "gap": None if np.isinf(info.gap) else info.gap,
        "twist": cfg.twist,
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 0


def cmd_beurling(ws: Workspace):
    S, T, _ = ws.ops
    b = ws.cfg["beurling"]
    sigma = b["sigma"]
    U = beurling_mod.extend_unitary(S, T, sigma, j_seed=b["j_seed"])
    rng = np.random.default_rng(b["probe_seed"])
    u = ws.grid.random_field(rng)
    v = ws.grid.random_field(rng)
    norm_uv = np.linalg.norm(u) * np.linalg.norm(v)

    def matrix_element(z):
        return complex(np.vdot(v, beurling_mod.resolvent_apply(U, z, u))) / norm_uv

    count = b["theta_count"]
    thetas = (np.arange(count) + 0.5) * (2.0 * np.pi / count)
    n_alpha = beurling_mod.maximal_function_scan(
        matrix_element, b["alpha"], thetas, b["radial_samples"]
    )
    r_edge = 1.0 - 2.0 ** (-b["radial_samples"])
    rows = []
    for theta, na in zip(thetas, n_alpha):
        bval = matrix_element(r_edge * np.exp(1j * theta))
        rows.append((float(theta), float(na), float(bval.real), float(bval.imag)))
    write_csv(ws.out_dir / "beurling.csv",
              ["theta", "n_alpha", "boundary_value_re", "boundary_value_im"],
              rows, provenance=ws.provenance())

    sig_rows = []
    for sg in b["sigma_grid"] or (sigma,):
        dd = twisted.deficiency_spaces(sg, S, T, rank_tol=1e-8)
        ker = twisted.kernel_K(sg, S, T, tol=1e-8)
        basis, _ = ws.eigenbasis()
        comp = twisted.form_comparison_scan(sg, S, T, ws.grid, basis)
        gap = min(dd.info_plus.gap, dd.info_minus.gap)
        sig_rows.append((float(sg), ker.dim, dd.d_plus, dd.d_minus,
                         comp["c_lower"], comp["c_upper"],
                         None if np.isinf(gap) else float(gap)))
    write_csv(ws.out_dir / "twisted_scan.csv",
              ["sigma", "dim_K", "d_plus", "d_minus", "c_lower", "c_upper", "gap"],
              sig_rows, provenance=ws.provenance())
    write_json(ws.out_dir / "beurling.json", {
        "sigma": sigma,
        "backend": U.backend,
        "unitarity_defect": U.unitarity_defect,
        "raw_defect": U.raw_defect,
        "d_plus": U.deficiency.d_plus,
        "d_minus": U.deficiency.d_minus,
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 0


def _product_pipeline(ws: Workspace, m, n_max):
    p = ws.cfg["product"]
    grid = ws.grid if m == ws.grid.m else Grid(ws.origami, m)
    S = assemble_S(grid)
    T = assemble_T(grid)
    d = ws.cfg["data"]
    f = grid.sample(lambda s, x, y: np.exp(2j * np.pi * (d["k"] * x + d["l"] * y)))
    bump = product.BumpSpec(p["chi_center"], p["chi_width"])
    setup = product.time_tau_setup(f, p["theta"], p["c"], bump, n_max, grid, phi0=p["phi0"])
    cfg = ws.solve_config(theta=p["theta"], sigma=0.0, obstruction="mean_only",
                          sobolev_r=None, sobolev_s=None)
    res = product.product_solve(setup.field, p["theta"], p["c"], cfg, grid, S, T,
                                drop_cos=True)
    rng = np.random.default_rng(p["sample_seed"])
    pts = [(int(rng.integers(ws.origami.n_squares)), float(x), float(y))
           for x, y in rng.uniform(0.05, 0.95, size=(p["n_samples"], 2))]
    residual = product.time_tau_check(res.solution, f, p["theta"], p["c"], grid, pts,
                                      phi0=p["phi0"])
    return setup, res, residual


def cmd_product(ws: Workspace):
    S, T, _ = ws.ops
    p = ws.cfg["product"]
    f = ws.data_field()
    modes = {n: ws.grid.zeros() for n in range(-p["n_max"], p["n_max"] + 1)}
    n_sel = min(p["n_max"], max(-p["n_max"], p["mode_n"]))
    modes[n_sel] = f
    F = product.ProductField(modes, p["n_max"])
    cfg = ws.solve_config(theta=p["theta"], sigma=0.0, obstruction="mean_only",
                          sobolev_r=None, sobolev_s=None)
    res = product.product_solve(F, p["theta"], p["c"], cfg, ws.grid, S, T)
    reports = []
    for n in sorted(res.reports):
        rep = res.reports[n]
        reports.append({
            "n": n, "residual": rep.residual, "twist": rep.twist,
            "obstruction_dim": rep.obstruction_dim,
            "solution_norm": ws.grid.norm(rep.solution),
        })
    write_json(ws.out_dir / "product.json", {
        "convention": res.convention,
        "defects": [{"n": n, "error": e} for n, e in res.defects],
        "mode_reports": reports,
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 2 if res.defects else 0


def cmd_timetau(ws: Workspace):
    p = ws.cfg["product"]
    m_list = p["m_list"] or (ws.grid.m,)
    n_list = p["n_list"] or (p["n_max"],)
    rows = []
    final = None
    for m, n_max in zip(m_list, n_list):
        setup, res, residual = _product_pipeline(ws, m, n_max)
        rows.append((m, n_max, residual, setup.normalization, len(res.defects)))
        final = (setup, res, residual)
    write_csv(ws.out_dir / "timetau.csv",
              ["m", "n_max", "residual", "chi_normalization", "defects"],
              rows, provenance=ws.provenance())
    setup, res, residual = final
    write_json(ws.out_dir / "timetau.json", {
        "residual": residual,
        "normalization": setup.normalization,
        "convention": res.convention,
        "mode_norm_head": {
            str(n): setup.mode_norms[n] for n in range(0, min(5, setup.field.n_max + 1))
        },
        "defects": [{"n": n, "error": e} for n, e in res.defects],
    }, config_echo=ws.cfg.echo(), surface_hash=ws.surface_hash)
    return 2 if res.defects else 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "weyl": cmd_weyl,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "invariants": cmd_invariants,
    "beurling": cmd_beurling,
    "product": cmd_product,
    "timetau": cmd_timetau,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="twistlab",
        description="numerical laboratory for twisted transport equations "
                    "on square-tiled surfaces",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config file (INI)")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config)
        out_dir = Path(args.out or cfg.get("output", "dir"))
        out_dir.mkdir(parents=True, exist_ok=True)
        ws = Workspace(cfg, out_dir, args.threads)
        return _COMMANDS[args.command](ws)
    except TwistlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
