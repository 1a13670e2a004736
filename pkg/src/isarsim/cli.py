"""Command-line front end: simulate, dataset, render, validate-slicy, info.

Machine-readable results go to standard output as JSON; progress and
warnings go to standard error. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .array_dataset import (
    DEFAULT_GROUND_DISTANCE_M,
    DatasetManifest,
    SampleInfo,
    _HEADER,
    class_table,
    enumerate_dataset,
    generate_dataset,
    generate_stack,
    read_dataset,
    read_sample,
    record_size,
    render_magnitude_png,
    save_png,
    write_dataset,
)
from .geometry import ArrayConfig, pose_for
from .imaging import WaveformSpec, form_image, synthesize_phase_history
from .mesh import StlError, TriangleMesh, load_stl, mesh_from_soup
from .models import SLICY_FOOTPRINT_M, flat_plate, make_model, model_catalog
from .noise import NoiseSpec, derive_seed
from .scattering import Bvh, RaySpec, trace_field, trace_returns

SLICY_ROTATIONS_DEG = (0, 45, 90, 135, 180, 225, 270, 315)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj))


def _load_model(name_or_path: str) -> TriangleMesh:
    path = Path(name_or_path)
    if path.exists():
        return load_stl(path.read_bytes())
    if name_or_path in model_catalog():
        return make_model(name_or_path)
    raise ValueError(f"model {name_or_path!r} is neither a file nor a built-in name")


def _ray_spec(args, waveform: WaveformSpec) -> RaySpec:
    return RaySpec(rays_per_axis=args.rays_per_axis,
                   wavelength_m=waveform.wavelength_m)


# -- simulate --------------------------------------------------------------

def cmd_simulate(args) -> int:
    mesh = _load_model(args.model)
    waveform = WaveformSpec()
    rays = _ray_spec(args, waveform)
    array = ArrayConfig(num_radars=args.radars, ground_distance_m=args.distance,
                        elevations_deg=(args.elevation,))
    table = class_table()
    target = args.model if args.model in table else Path(args.model).stem
    stack = generate_stack(mesh, array, args.offset, args.elevation,
                           NoiseSpec(args.snr), waveform, rays,
                           target=target, master_seed=args.seed)
    out = Path(args.out)
    manifest = DatasetManifest(
        targets=[target], radar_count=args.radars,
        ground_distance_m=args.distance, elevations_deg=[float(args.elevation)],
        noise_levels_db=[float(args.snr)], master_seed=args.seed,
        samples=[SampleInfo(index=0, offset_bytes=_HEADER.size, target=target,
                            label=stack.label, elevation_deg=float(args.elevation),
                            offset_deg=int(args.offset), snr_db=float(args.snr),
                            seed=stack.meta.seed, fold=0)])
    write_dataset(manifest, [stack], out)
    pngs = []
    if args.png:
        for r, channel in enumerate(stack.channels):
            png_path = out / f"sample00000_ch{r}.png"
            save_png(render_magnitude_png(channel, 40.0), png_path)
            pngs.append(str(png_path))
    _emit({"out": str(out), "samples": 1, "channels": args.radars, "pngs": pngs})
    return 0


# -- dataset ---------------------------------------------------------------

_CONFIG_FIELDS = {"version", "targets", "radars", "ground_distance_m",
                  "elevations_deg", "noise_levels_db", "master_seed",
                  "waveform", "rays", "offset_stride"}


def _load_config(path: str | None) -> dict:
    config = {
        "version": 1,
        "targets": class_table(),
        "radars": 1,
        "ground_distance_m": DEFAULT_GROUND_DISTANCE_M,
        "elevations_deg": [15.0, 30.0],
        "noise_levels_db": [200.0, 150.0, 100.0],
        "master_seed": 0,
        "waveform": {},
        "rays": {},
        "offset_stride": 1,
    }
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        unknown = set(loaded) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"invalid config field {sorted(unknown)[0]!r}")
        if loaded.get("version", 1) != 1:
            raise ValueError("invalid config field 'version': must be 1")
        config.update(loaded)
    return config


def cmd_dataset(args) -> int:
    config = _load_config(args.config)
    if args.radars is not None:
        config["radars"] = args.radars
    if args.noise is not None:
        config["noise_levels_db"] = args.noise
    if args.elevations is not None:
        config["elevations_deg"] = args.elevations
    if args.seed is not None:
        config["master_seed"] = args.seed
    if args.offset_stride is not None:
        config["offset_stride"] = args.offset_stride

    targets = config["targets"]
    if isinstance(targets, dict):
        names = list(targets)
        meshes = {name: _load_model(str(spec)) for name, spec in targets.items()}
    else:
        names = list(targets)
        meshes = {name: _load_model(name) for name in names}

    waveform = WaveformSpec(**config["waveform"])
    ray_kwargs = dict(config["rays"])
    ray_kwargs.setdefault("wavelength_m", waveform.wavelength_m)
    if args.rays_per_axis is not None:
        ray_kwargs["rays_per_axis"] = args.rays_per_axis
    rays = RaySpec(**ray_kwargs)
    array = ArrayConfig(num_radars=config["radars"],
                        ground_distance_m=config["ground_distance_m"],
                        elevations_deg=tuple(config["elevations_deg"]))
    manifest = enumerate_dataset(names, array, config["noise_levels_db"],
                                 config["master_seed"], waveform=waveform,
                                 rays=rays, offset_stride=config["offset_stride"])
    if args.plan:
        _emit({"samples": manifest.sample_count, "radars": manifest.radar_count,
               "targets": names, "elevations_deg": manifest.elevations_deg,
               "noise_levels_db": manifest.noise_levels_db,
               "record_bytes": manifest.record_size()})
        print(f"{manifest.sample_count} samples")
        return 0

    if args.out is None:
        raise ValueError("--out is required unless --plan is given")
    total = manifest.sample_count
    started = time.monotonic()

    def progress(done, _total):
        if done % max(1, total // 20) == 0 or done == total:
            _log(f"generated {done}/{total} samples "
                 f"({time.monotonic() - started:.1f}s)")

    generate_dataset(meshes, manifest, args.out, workers=args.workers,
                     progress=progress)
    check_manifest, _ = read_dataset(args.out)
    _emit({"out": str(args.out), "samples": check_manifest.sample_count,
           "radars": check_manifest.radar_count,
           "elapsed_s": round(time.monotonic() - started, 2)})
    print(f"{check_manifest.sample_count} samples")
    return 0


# -- render ----------------------------------------------------------------

def cmd_render(args) -> int:
    stack = read_sample(args.dataset, args.index)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r, channel in enumerate(stack.channels):
        path = out / f"sample{args.index:05d}_ch{r}.png"
        save_png(render_magnitude_png(channel, args.dynamic_range), path)
        files.append(str(path))
    _emit({"index": args.index, "label": stack.label, "pngs": files})
    return 0


# -- validate-slicy --------------------------------------------------------

def _scaled_to_footprint(mesh: TriangleMesh) -> TriangleMesh:
    """Uniformly scale so the longer horizontal extent matches the
    published footprint; warn when the planform is off by > 10%."""
    lo, hi = mesh.bounds
    extents = np.sort((hi - lo)[:2])
    wide, long_ = sorted(SLICY_FOOTPRINT_M)
    if extents[1] <= 0:
        raise ValueError("model has no horizontal extent")
    scale = long_ / extents[1]
    scaled_wide = extents[0] * scale
    if abs(scaled_wide - wide) / wide > 0.10:
        _log(f"warning: footprint {extents[0]:.3f} x {extents[1]:.3f} m deviates "
             f"more than 10% from {wide} x {long_} m after scaling")
    return mesh.scaled(scale) if abs(scale - 1.0) > 1e-12 else mesh


def _occlusion_check(rays: RaySpec) -> bool:
    """Small plate hidden behind a large one must contribute nothing."""
    front = flat_plate(3.0, 3.0)
    hidden = flat_plate(1.0, 1.0)
    tris = np.concatenate([
        front.vertices[front.triangles],
        hidden.vertices[hidden.triangles] - [1.0, 0.0, 0.0]])
    pair = mesh_from_soup(tris, None, center=False)
    pose = pose_for(DEFAULT_GROUND_DISTANCE_M, 0.0, 0.0)
    result = trace_field(pair, pose, rays)
    lit = result.amp > 0.0
    hit_x = result.hits[..., 0][lit]
    return bool(len(hit_x) > 0 and np.all(hit_x > -0.5))


def cmd_validate_slicy(args) -> int:
    started = time.monotonic()
    mesh = _scaled_to_footprint(_load_model(args.model))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    waveform = WaveformSpec()
    rays = _ray_spec(args, waveform)
    bvh = Bvh(mesh)
    elevations = args.elevations or [15.0, 30.0]

    energies = {}
    pngs = []
    for elevation in elevations:
        for rotation in SLICY_ROTATIONS_DEG:
            pose = pose_for(args.distance, elevation, rotation)
            history = synthesize_phase_history(
                mesh, pose, waveform, rays,
                seed=derive_seed(0, "validate", elevation, rotation), bvh=bvh)
            image = form_image(history)
            name = f"slicy_e{int(elevation)}_r{rotation:03d}.png"
            save_png(render_magnitude_png(image, 40.0), out / name)
            pngs.append(name)
            energies[(elevation, rotation)] = image.energy
            _log(f"rendered {name} ({time.monotonic() - started:.1f}s)")

    cardinal_ok = True
    for elevation in elevations:
        for rotation in (0, 90, 180, 270):
            returns = trace_returns(mesh, pose_for(args.distance, elevation, rotation),
                                    rays, bvh=bvh)
            if not any(r.bounce_count >= 2 for r in returns):
                cardinal_ok = False
                _log(f"no multibounce return at elevation {elevation} "
                     f"rotation {rotation}")

    occlusion_ok = _occlusion_check(rays)

    variation_db = {}
    variation_ok = True
    for elevation in elevations:
        values = [energies[(elevation, r)] for r in SLICY_ROTATIONS_DEG]
        spread = 10.0 * math.log10(max(values) / min(values))
        variation_db[str(elevation)] = round(spread, 2)
        if spread <= 3.0:
            variation_ok = False

    report = {
        "pngs": len(pngs),
        "assertions": {
            "cardinal_multibounce": cardinal_ok,
            "occlusion": occlusion_ok,
            "aspect_variation": variation_ok,
        },
        "aspect_variation_db": variation_db,
        "elapsed_s": round(time.monotonic() - started, 2),
    }
    report["pass"] = all(report["assertions"].values())
    _emit(report)
    return 0 if report["pass"] else 1


# -- info / make-model -----------------------------------------------------

def cmd_info(args) -> int:
    if args.model is None and args.dataset is None:
        raise ValueError("info needs --model or --dataset")
    if args.model is not None:
        mesh = _load_model(args.model)
        lo, hi = mesh.bounds
        _emit({"model": args.model, "triangles": mesh.triangle_count,
               "surface_area_m2": round(mesh.surface_area, 6),
               "bounds_min": [round(v, 6) for v in lo],
               "bounds_max": [round(v, 6) for v in hi],
               "dropped_degenerate": mesh.dropped_degenerate})
    if args.dataset is not None:
        manifest, _ = read_dataset(args.dataset)
        folds = [0] * 10
        for s in manifest.samples:
            folds[s.fold] += 1
        _emit({"dataset": str(args.dataset), "samples": manifest.sample_count,
               "radars": manifest.radar_count, "targets": manifest.targets,
               "elevations_deg": manifest.elevations_deg,
               "noise_levels_db": manifest.noise_levels_db,
               "fold_sizes": folds, "generator": manifest.generator})
    return 0


def cmd_make_model(args) -> int:
    mesh = make_model(args.name)
    if args.scale != 1.0:
        mesh = mesh.scaled(args.scale)
    out = Path(args.out)
    out.write_bytes(mesh.to_stl_bytes())
    _emit({"out": str(out), "triangles": mesh.triangle_count})
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isarsim",
        description="Deterministic multi-radar ISAR image simulation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one multi-radar stack")
    sim.add_argument("--model", required=True, help="STL path or built-in name")
    sim.add_argument("--radars", type=int, default=1)
    sim.add_argument("--distance", type=float, default=DEFAULT_GROUND_DISTANCE_M)
    sim.add_argument("--offset", type=int, default=0)
    sim.add_argument("--elevation", type=float, default=15.0)
    sim.add_argument("--snr", type=float, default=201.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--rays-per-axis", type=int, default=64)
    sim.add_argument("--out", required=True)
    sim.add_argument("--png", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    ds = sub.add_parser("dataset", help="generate a full dataset")
    ds.add_argument("--config", help="JSON config path")
    ds.add_argument("--out")
    ds.add_argument("--workers", type=int, default=1)
    ds.add_argument("--plan", action="store_true",
                    help="print the sample plan without simulating")
    ds.add_argument("--radars", type=int)
    ds.add_argument("--noise", type=float, nargs="+")
    ds.add_argument("--elevations", type=float, nargs="+")
    ds.add_argument("--seed", type=int)
    ds.add_argument("--offset-stride", type=int, dest="offset_stride")
    ds.add_argument("--rays-per-axis", type=int, dest="rays_per_axis")
    ds.set_defaults(func=cmd_dataset)

    ren = sub.add_parser("render", help="render one sample to PNG")
    ren.add_argument("--dataset", required=True)
    ren.add_argument("--index", type=int, default=0)
    ren.add_argument("--out", required=True)
    ren.add_argument("--dynamic-range", type=float, default=40.0)
    ren.set_defaults(func=cmd_render)

    val = sub.add_parser("validate-slicy",
                         help="render the calibration target and check it")
    val.add_argument("--model", required=True)
    val.add_argument("--out", required=True)
    val.add_argument("--distance", type=float, default=DEFAULT_GROUND_DISTANCE_M)
    val.add_argument("--elevations", type=float, nargs="+")
    val.add_argument("--rays-per-axis", type=int, default=64)
    val.set_defaults(func=cmd_validate_slicy)

    inf = sub.add_parser("info", help="describe a model or dataset")
    inf.add_argument("--model")
    inf.add_argument("--dataset")
    inf.set_defaults(func=cmd_info)

    mk = sub.add_parser("make-model", help="write a built-in model as STL")
    mk.add_argument("--name", required=True)
    mk.add_argument("--out", required=True)
    mk.add_argument("--scale", type=float, default=1.0)
    mk.set_defaults(func=cmd_make_model)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, StlError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
