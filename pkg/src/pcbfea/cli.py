"""``pcbfea`` command line."""
from __future__ import annotations

import os

# cap BLAS/OpenMP width before numpy is imported
_threads = os.environ.get("PCBFEA_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import warnings  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .analysis import Analysis  # noqa: E402
from .errors import PcbFeaError, ValidationError  # noqa: E402
from .io.manifest import RunManifest  # noqa: E402
from .io.model_file import parse_model, shipped_model_path  # noqa: E402
from .io.reports import (  # noqa: E402
    comparison_rows,
    effective_mass_curve_rows,
    frequency_rows,
    history_rows,
    participation_rows,
    probe_rows,
    substep_rows,
    summary_rows,
    write_csv,
)
from .io.vtk import write_vtk  # noqa: E402
from .mesher import MeshParams, mesh_quality_report  # noqa: E402
from .solvers import damping_sweep, fit_rayleigh  # noqa: E402

log = logging.getLogger("pcbfea")


def _load_model(args):
    if args.model:
        p = Path(args.model)
        if not p.exists():
            p = shipped_model_path(args.model)
        return parse_model(p)
    return parse_model(shipped_model_path(f"aed_{args.supports}support"))


def _params(args) -> MeshParams:
    d = MeshParams()
    size = args.element_size * 1e-3 if args.element_size else d.target_element_size
    return MeshParams(size, args.layers or d.board_thickness_layers, args.facets or d.curved_shape_facets)


def _weak(args):
    if args.weak_springs is None:
        return None
    return "default" if args.weak_springs == "default" else float(args.weak_springs)


def _prepare(args, model, manifest, mass=True):
    with manifest.phase("mesh+assembly"):
        return Analysis.prepare(model, _params(args), weak_springs=_weak(args), mass=mass)


def _out(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(manifest, out: Path, *paths):
    manifest.add(*paths)
    manifest.write(out / "manifest.json")
    for p in paths:
        print(p)


# -- subcommands -------------------------------------------------------------


def cmd_validate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = _load_model(args)
    for w in caught:
        print(f"warning: {w.message}")
    print(f"{model.name}: ok ({len(model.components)} components, {len(model.supports)} supports)")
    return 0


def cmd_mesh(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("mesh", model, _params(args))
    with man.phase("mesh"):
        from .mesher import generate_mesh

        mesh = generate_mesh(model, _params(args))
    q = mesh_quality_report(mesh)
    print(f"nodes {q.n_nodes}  elements {q.n_elements}  min scaled jacobian {q.min_scaled_jacobian:.3f}  max aspect {q.max_aspect_ratio:.1f}")
    p = write_vtk(out / "mesh.vtk", mesh, title=f"pcbfea mesh {man.model_hash[:12]}")
    _finish(man, out, p)
    return 0


def cmd_static(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("static", model, _params(args), load=args.load, weak_springs=args.weak_springs)
    a = _prepare(args, model, man, mass=False)
    with man.phase("solve"):
        r = a.static(args.load)
    node = r.max_node
    summary = {
        "max_deformation_m": r.max_deformation,
        "max_node": node,
        "max_x_m": a.mesh.nodes[node, 0],
        "max_y_m": a.mesh.nodes[node, 1],
        "max_z_m": a.mesh.nodes[node, 2],
        "distance_to_supports_m": a.distance_to_supports(node),
        "relative_residual": r.relative_residual,
        "backward_error": r.backward_error,
        "equilibrium_error": r.equilibrium_error(),
    }
    print(f"max deformation {r.max_deformation:.6g} m at node {node}")
    p1 = write_csv(out / "static_summary.csv", *summary_rows(summary))
    p2 = write_vtk(
        out / "static.vtk",
        a.mesh,
        {"displacement": r.displacement, "displacement_magnitude": r.magnitude},
        title=f"pcbfea static {man.model_hash[:12]}",
    )
    _finish(man, out, p1, p2)
    return 0


def cmd_nonlinear(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("nonlinear", model, _params(args), load=args.load, substeps=args.substeps)
    a = _prepare(args, model, man, mass=False)
    with man.phase("solve"):
        r = a.nonlinear(args.load, args.substeps, max_iterations=args.max_iterations, max_cutbacks=args.cutbacks)
    print(f"max deformation {r.max_deformation:.6g} m, {len(r.history)} iterations")
    p1 = write_csv(out / "convergence.csv", *history_rows(r.history))
    p2 = write_csv(out / "substeps.csv", *substep_rows(r.history))
    _finish(man, out, p1, p2)
    return 0


def _mode_vtk(a, modes, path, title):
    fields = {f"mode_{i + 1}": modes.shapes[:, i].reshape(-1, 3) for i in range(len(modes))}
    return write_vtk(path, a.mesh, fields, title=title)


def cmd_modal(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("modal", model, _params(args), modes=args.modes, prestressed=args.prestressed, weak_springs=args.weak_springs)
    a = _prepare(args, model, man)
    paths = []
    with man.phase("eigensolve"):
        modes = a.modal(args.modes)
    paths.append(write_csv(out / "frequencies.csv", *frequency_rows(modes)))
    paths.append(_mode_vtk(a, modes, out / "modes.vtk", f"pcbfea modal {man.model_hash[:12]}"))
    report = modes
    if args.prestressed:
        with man.phase("prestressed eigensolve"):
            pre = a.modal(args.modes, prestressed=True, load=args.load)
        from .modal_post import compare_modesets

        paths.append(write_csv(out / "frequencies_prestressed.csv", *frequency_rows(pre)))
        paths.append(write_csv(out / "prestress_comparison.csv", *comparison_rows(compare_modesets(modes, pre))))
        report = pre
    for i, f in enumerate(report.frequencies):
        print(f"mode {i + 1}: {f:.6g} Hz")
    if args.participation:
        table = a.participation(report)
        target = Path(args.participation)
        target = target if target.is_absolute() or target.parent != Path(".") else out / target
        paths.append(write_csv(target, *participation_rows(table)))
        paths.append(write_csv(target.with_name(target.stem + "_curve.csv"), *effective_mass_curve_rows(table)))
    _finish(man, out, *paths)
    return 0


def _parse_pair(text: str) -> tuple[float, float]:
    a, b = (float(v) for v in text.split(","))
    return a, b


def _parse_sweep(text: str) -> np.ndarray:
    a, b, s = (float(v) for v in text.split(":"))
    return damping_sweep(a, b, s)


def cmd_transient(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start(
        "transient", model, _params(args), load=args.load, dt=args.dt, t_end=args.t_end, damping=args.damping, fit=args.fit, sweep=args.sweep
    )
    a = _prepare(args, model, man)
    fa, fb = _parse_pair(args.fit)
    zetas = _parse_sweep(args.sweep) if args.sweep else [args.damping]
    paths = []
    for z in zetas:
        damping = fit_rayleigh(z, fa, fb) if z else None
        with man.phase(f"newmark zeta={z:g}"):
            r = a.transient(args.load, args.dt, args.t_end, damping)
        name = f"transient_zeta_{z:g}.csv" if args.sweep else "transient.csv"
        # only the peak-deflection history by default; probe columns would be every dof
        r.probes, r.displacement = r.probes[:0], r.displacement[:, :0]
        paths.append(write_csv(out / name, *probe_rows(r)))
        print(f"zeta {z:g}: peak deformation {r.max_deformation.max():.6g} m")
    _finish(man, out, *paths)
    return 0


def cmd_thermal(args) -> int:
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("thermal", model, _params(args))
    a = _prepare(args, model, man, mass=False)
    with man.phase("solve"):
        f = a.thermal()
    hs = f.hotspot
    where = a.mesh.regions[np.bincount(a.mesh.element_region[np.nonzero((a.mesh.elements == hs).any(axis=1))[0]]).argmax()]
    summary = {
        "max_temperature_c": float(f.temperature.max()),
        "min_temperature_c": float(f.temperature.min()),
        "hotspot_node": hs,
        "hotspot_region": where,
        "error_fraction": f.error_fraction,
        "max_error_indicator": float(f.indicator.max()),
        "generated_w": f.balance.generated,
        "convected_w": f.balance.convected,
        "dirichlet_w": f.balance.dirichlet,
        "energy_imbalance": f.balance.imbalance,
        "relative_residual": f.relative_residual,
        "error_estimator": "Zienkiewicz-Zhu flux recovery",
    }
    print(f"max temperature {f.temperature.max():.4g} C in {where}")
    p1 = write_csv(out / "thermal_summary.csv", *summary_rows(summary))
    p2 = write_vtk(
        out / "thermal.vtk",
        a.mesh,
        {"temperature": f.temperature, "heat_flux": f.flux},
        {"error_indicator": f.indicator},
        title=f"pcbfea thermal {man.model_hash[:12]}",
    )
    _finish(man, out, p1, p2)
    return 0


def cmd_report(args) -> int:
    """Static, modal with participation, prestressed comparison and thermal in one run."""
    model = _load_model(args)
    out = _out(args)
    man = RunManifest.start("report", model, _params(args), modes=args.modes, load=args.load)
    a = _prepare(args, model, man)
    paths = []
    with man.phase("static"):
        st = a.static(args.load)
    paths.append(
        write_csv(
            out / "static_summary.csv",
            *summary_rows({"max_deformation_m": st.max_deformation, "max_node": st.max_node, "equilibrium_error": st.equilibrium_error()}),
        )
    )
    with man.phase("modal"):
        modes = a.modal(args.modes)
    from .modal_post import compare_modesets
    from .solvers import prestress

    with man.phase("prestressed modal"):
        prestress(a.system, st)
        pre = a.modal(args.modes, prestressed=True)
    table = a.participation(modes)
    paths.append(write_csv(out / "frequencies.csv", *frequency_rows(modes)))
    paths.append(write_csv(out / "frequencies_prestressed.csv", *frequency_rows(pre)))
    paths.append(write_csv(out / "prestress_comparison.csv", *comparison_rows(compare_modesets(modes, pre))))
    paths.append(write_csv(out / "participation.csv", *participation_rows(table)))
    paths.append(write_csv(out / "participation_curve.csv", *effective_mass_curve_rows(table)))
    if model.thermal_case is not None:
        with man.phase("thermal"):
            f = a.thermal()
        paths.append(
            write_csv(
                out / "thermal_summary.csv",
                *summary_rows({"max_temperature_c": float(f.temperature.max()), "error_fraction": f.error_fraction}),
            )
        )
    _finish(man, out, *paths)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "mesh": cmd_mesh,
    "static": cmd_static,
    "nonlinear": cmd_nonlinear,
    "modal": cmd_modal,
    "transient": cmd_transient,
    "thermal": cmd_thermal,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", nargs="?", help="model file or shipped model name (default: AED board)")
    common.add_argument("--supports", type=int, choices=(4, 8), default=4, help="AED support count when no model is given")
    common.add_argument("--element-size", type=float, metavar="MM", help="target in-plane element size in mm")
    common.add_argument("--layers", type=int, help="element layers through the board thickness")
    common.add_argument("--facets", type=int, help="facets per curved component outline")
    common.add_argument("--weak-springs", metavar="K", help="weak spring stiffness in N/m, or 'default'")
    common.add_argument("--load", help="load case name (default: the first)")
    common.add_argument("-o", "--output", default="pcbfea_out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pcbfea", description="Structural and thermal FEA of populated circuit boards.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a model file")
    sub.add_parser("mesh", parents=[common], help="mesh and write mesh.vtk")
    sub.add_parser("static", parents=[common], help="linear static solve")
    s = sub.add_parser("nonlinear", parents=[common], help="Newton-Raphson solve with convergence history")
    s.add_argument("--substeps", type=int, default=5)
    s.add_argument("--max-iterations", type=int, default=25)
    s.add_argument("--cutbacks", type=int, default=6, help="halvings of a failing load increment before giving up")
    s = sub.add_parser("modal", parents=[common], help="natural frequencies and mode shapes")
    s.add_argument("--modes", type=int, default=6)
    s.add_argument("--prestressed", action="store_true", help="also solve with stress stiffening from the static load")
    s.add_argument("--participation", metavar="CSV", help="write the mass participation table")
    s = sub.add_parser("transient", parents=[common], help="Newmark response to a time-varying load")
    s.add_argument("--dt", type=float, default=1e-4)
    s.add_argument("--t-end", type=float, default=0.01)
    s.add_argument("--damping", type=float, default=0.0, metavar="ZETA")
    s.add_argument("--fit", default="10,1000", metavar="FA,FB", help="frequencies (Hz) where ZETA is matched")
    s.add_argument("--sweep", metavar="A:B:STEP", help="run a range of damping ratios, e.g. 0.001:0.005:0.001")
    sub.add_parser("thermal", parents=[common], help="steady-state temperatures and error indicators")
    s = sub.add_parser("report", parents=[common], help="static, modal, participation and thermal tables")
    s.add_argument("--modes", type=int, default=6)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        for issue in exc.issues:
            print(f"error: {issue.path}: {issue.message}", file=sys.stderr)
        return 2
    except (PcbFeaError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
