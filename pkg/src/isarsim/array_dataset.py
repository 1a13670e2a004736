"""Multi-radar dataset assembly: enumeration, folds, and the binary format.

A dataset is the cross product targets x elevations x turntable offsets x
noise levels. Each sample is a stack of R complex images, one per radar
in the circular array, stored in a fixed little-endian binary layout with
a per-sample CRC so the classifier side can read it with a few dozen
lines in any language. Generation is deterministic: every sample's seed
derives from the master seed and the sample's identity, so worker count
and scheduling order never change the output bytes.

File layout (dataset.bin):
    magic "ISARDS01" | u32 version=1 | u32 count | u32 R | u32 54 | u32 54
    then per sample:
    u8 label | f32 elevation | u16 offset | f32 snr_db | u64 seed
    | R*54*54 little-endian complex64, row-major, channel-major
    | u32 CRC32 over the 19-byte meta block plus the image block
A manifest.json alongside mirrors the enumeration and fold assignment.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .geometry import ArrayConfig, enumerate_offsets, pose_for, radar_azimuths
from .imaging import ComplexImage, PhaseHistory, WaveformSpec, form_image, synthesize_phase_history
from .mesh import TriangleMesh, load_stl
from .noise import GENERATOR_NAME, NoiseSpec, add_noise, derive_seed
from .scattering import Bvh, RaySpec

MAGIC = b"ISARDS01"
FORMAT_VERSION = 1
IMAGE_SIDE = 54
NUM_FOLDS = 10
DEFAULT_GROUND_DISTANCE_M = 1000.0

_HEADER = struct.Struct("<8s5I")
_SAMPLE_META = struct.Struct("<BfHfQ")

SEED_DERIVATION = (
    "sample = sha256(master_seed, target, elevation_deg, offset_deg, snr_db)[:8]; "
    "per-channel jitter = sha256(sample, 'jitter', radar_index)[:8]; "
    "per-channel noise = sha256(sample, 'noise', radar_index)[:8]; "
    "values are rendered with str() and joined with 0x1f separators"
)


def class_table() -> list:
    """The seven target classes in fixed label order."""
    return ["F15", "F16", "J11", "J15", "MIG29", "MIG35", "EF2000"]


@dataclass(frozen=True)
class StackMeta:
    target: str
    label: int
    elevation_deg: float
    offset_deg: int
    snr_db: float
    seed: int


@dataclass
class ImageStack:
    """One sample: R aligned complex images of the same scene."""

    channels: list
    label: int
    meta: StackMeta

    def __post_init__(self):
        if not 1 <= len(self.channels) <= 8:
            raise ValueError("a stack holds between 1 and 8 channels")
        for ch in self.channels:
            if ch.data.shape != (IMAGE_SIDE, IMAGE_SIDE):
                raise ValueError(f"channels must be {IMAGE_SIDE}x{IMAGE_SIDE}")
        if not 0 <= self.label <= 6:
            raise ValueError("label must be a class id in [0, 6]")

    def block(self) -> np.ndarray:
        """(R, 54, 54) complex64 view used by the serializer."""
        return np.stack([ch.data for ch in self.channels]).astype(np.complex64)


@dataclass(frozen=True)
class SampleInfo:
    index: int
    offset_bytes: int
    target: str
    label: int
    elevation_deg: float
    offset_deg: int
    snr_db: float
    seed: int
    fold: int


@dataclass
class DatasetManifest:
    targets: list
    radar_count: int
    ground_distance_m: float
    elevations_deg: list
    noise_levels_db: list
    master_seed: int
    generator: str = GENERATOR_NAME
    seed_derivation: str = SEED_DERIVATION
    waveform: dict = field(default_factory=lambda: asdict(WaveformSpec()))
    rays: dict = field(default_factory=lambda: asdict(RaySpec()))
    samples: list = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    def record_size(self) -> int:
        return record_size(self.radar_count)

    def to_json(self) -> str:
        d = asdict(self)
        d["format"] = MAGIC.decode()
        d["version"] = FORMAT_VERSION
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        if d.pop("format", MAGIC.decode()) != MAGIC.decode():
            raise ValueError("not a dataset manifest")
        if d.pop("version", FORMAT_VERSION) != FORMAT_VERSION:
            raise ValueError("unsupported manifest version")
        samples = [SampleInfo(**s) for s in d.pop("samples")]
        return cls(samples=samples, **d)


def record_size(radar_count: int) -> int:
    return _SAMPLE_META.size + radar_count * IMAGE_SIDE * IMAGE_SIDE * 8 + 4


def sample_seed(master_seed: int, target: str, elevation_deg: float,
                offset_deg: int, snr_db: float) -> int:
    return derive_seed(master_seed, target, elevation_deg, offset_deg, snr_db)


def generate_stack(mesh: TriangleMesh, array: ArrayConfig, offset_deg: int,
                   elevation_deg: float, noise: NoiseSpec,
                   waveform: WaveformSpec | None = None,
                   rays: RaySpec | None = None, *,
                   target: str = "", master_seed: int = 0,
                   bvh: Bvh | None = None) -> ImageStack:
    """Simulate every radar in the array for one turntable position.

    Noise is injected into the phase history before imaging; with the
    unitary transform this lands the same SNR in the image domain. Each
    channel draws its grid jitter and noise from seeds derived from the
    sample seed and the radar index.
    """
    waveform = waveform or WaveformSpec()
    rays = rays or RaySpec(wavelength_m=waveform.wavelength_m)
    table = class_table()
    label = table.index(target) if target in table else 0
    seed = sample_seed(master_seed, target, elevation_deg, offset_deg, noise.snr_db)
    if bvh is None:
        bvh = Bvh(mesh)
    channels = []
    for r, azimuth in enumerate(radar_azimuths(array, offset_deg)):
        pose = pose_for(array.ground_distance_m, elevation_deg, azimuth)
        history = synthesize_phase_history(
            mesh, pose, waveform, rays,
            seed=derive_seed(seed, "jitter", r), bvh=bvh)
        noisy = add_noise(history.samples, noise, derive_seed(seed, "noise", r))
        channels.append(form_image(PhaseHistory(noisy, waveform)))
    meta = StackMeta(target=target, label=label, elevation_deg=float(elevation_deg),
                     offset_deg=int(offset_deg), snr_db=float(noise.snr_db), seed=seed)
    return ImageStack(channels=channels, label=label, meta=meta)


def enumerate_dataset(target_names: list, array: ArrayConfig,
                      noise_levels_db: list, master_seed: int = 0, *,
                      waveform: WaveformSpec | None = None,
                      rays: RaySpec | None = None,
                      offset_stride: int = 1) -> DatasetManifest:
    """Lay out every sample and assign stratified cross-validation folds.

    Iteration order is targets, then elevations, then offsets, then noise
    levels. Folds partition each (class, noise) stratum with sizes that
    differ by at most one, shuffled deterministically from the master seed.
    offset_stride > 1 keeps every stride-th turntable offset; a smoke-run
    subsampling knob, not part of the standard enumeration.
    """
    table = class_table()
    for name in target_names:
        if name not in table:
            raise ValueError(f"unknown target {name!r}")
    if offset_stride < 1:
        raise ValueError("offset_stride must be >= 1")
    waveform = waveform or WaveformSpec()
    rays = rays or RaySpec(wavelength_m=waveform.wavelength_m)
    offsets = [o for o in enumerate_offsets(array) if o % offset_stride == 0]
    rsize = record_size(array.num_radars)
    samples = []
    index = 0
    for name in target_names:
        for elevation in array.elevations_deg:
            for offset in offsets:
                for snr in noise_levels_db:
                    seed = sample_seed(master_seed, name, elevation, offset, snr)
                    samples.append(SampleInfo(
                        index=index, offset_bytes=_HEADER.size + index * rsize,
                        target=name, label=table.index(name),
                        elevation_deg=float(elevation), offset_deg=int(offset),
                        snr_db=float(snr), seed=seed, fold=-1))
                    index += 1

    # fold assignment: shuffle each (class, noise) stratum, deal round-robin
    assigned = {}
    for name in target_names:
        for snr in noise_levels_db:
            stratum = [s.index for s in samples
                       if s.target == name and s.snr_db == float(snr)]
            rng = np.random.Generator(np.random.Philox(
                key=np.uint64(derive_seed(master_seed, "folds", name, snr))))
            order = rng.permutation(len(stratum))
            for pos, which in enumerate(order):
                assigned[stratum[which]] = pos % NUM_FOLDS
    samples = [SampleInfo(**{**asdict(s), "fold": assigned[s.index]})
               for s in samples]

    return DatasetManifest(
        targets=list(target_names), radar_count=array.num_radars,
        ground_distance_m=array.ground_distance_m,
        elevations_deg=[float(e) for e in array.elevations_deg],
        noise_levels_db=[float(n) for n in noise_levels_db],
        master_seed=int(master_seed),
        waveform=asdict(waveform), rays=asdict(rays), samples=samples)


def _encode_record(stack: ImageStack) -> bytes:
    m = stack.meta
    head = _SAMPLE_META.pack(stack.label, m.elevation_deg, m.offset_deg,
                             m.snr_db, m.seed)
    body = stack.block().astype("<c8").tobytes()
    payload = head + body
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def _decode_record(blob: bytes, radar_count: int, index: int) -> ImageStack:
    meta_end = _SAMPLE_META.size
    data_end = len(blob) - 4
    (crc,) = struct.unpack_from("<I", blob, data_end)
    if zlib.crc32(blob[:data_end]) & 0xFFFFFFFF != crc:
        raise ValueError(f"checksum mismatch in sample {index}")
    label, elevation, offset, snr, seed = _SAMPLE_META.unpack_from(blob, 0)
    block = np.frombuffer(blob[meta_end:data_end], dtype="<c8")
    block = block.reshape(radar_count, IMAGE_SIDE, IMAGE_SIDE)
    channels = [ComplexImage(block[r]) for r in range(radar_count)]
    meta = StackMeta(target="", label=label, elevation_deg=elevation,
                     offset_deg=offset, snr_db=snr, seed=seed)
    return ImageStack(channels=channels, label=label, meta=meta)


def write_dataset(manifest: DatasetManifest, stacks, directory) -> Path:
    """Write dataset.bin + manifest.json; stacks iterate in manifest order.

    Output lands in temporary files that are renamed only after every
    sample is written, so failed runs leave no partial dataset behind.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tmp_bin = directory / "dataset.bin.tmp"
    count = 0
    try:
        with open(tmp_bin, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, manifest.sample_count,
                                  manifest.radar_count, IMAGE_SIDE, IMAGE_SIDE))
            for stack in stacks:
                if len(stack.channels) != manifest.radar_count:
                    raise ValueError("stack channel count does not match manifest")
                fh.write(_encode_record(stack))
                count += 1
        if count != manifest.sample_count:
            raise ValueError(f"expected {manifest.sample_count} stacks, got {count}")
    except Exception:
        tmp_bin.unlink(missing_ok=True)
        raise
    tmp_manifest = directory / "manifest.json.tmp"
    tmp_manifest.write_text(manifest.to_json())
    os.replace(tmp_bin, directory / "dataset.bin")
    os.replace(tmp_manifest, directory / "manifest.json")
    return directory


def read_dataset(directory):
    """Load the manifest and return (manifest, stack iterator).

    The iterator validates the per-sample checksum as it goes and raises
    with the failing sample index.
    """
    directory = Path(directory)
    manifest = DatasetManifest.from_json((directory / "manifest.json").read_text())
    path = directory / "dataset.bin"
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise ValueError("dataset file truncated in header")
    magic, version, count, radars, height, width = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ValueError("bad magic; not a dataset file")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    if (height, width) != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError("unexpected image size in header")
    if count != manifest.sample_count or radars != manifest.radar_count:
        raise ValueError("manifest and dataset header disagree")

    def stacks():
        rsize = record_size(radars)
        with open(path, "rb") as fh:
            fh.seek(_HEADER.size)
            for index in range(count):
                blob = fh.read(rsize)
                if len(blob) < rsize:
                    raise ValueError(f"dataset file truncated in sample {index}")
                yield _decode_record(blob, radars, index)

    return manifest, stacks()


def read_sample(directory, index: int) -> ImageStack:
    """Random access to a single sample by manifest index."""
    directory = Path(directory)
    manifest = DatasetManifest.from_json((directory / "manifest.json").read_text())
    if not 0 <= index < manifest.sample_count:
        raise ValueError(f"sample index {index} out of range")
    rsize = manifest.record_size()
    with open(directory / "dataset.bin", "rb") as fh:
        fh.seek(_HEADER.size + index * rsize)
        blob = fh.read(rsize)
    if len(blob) < rsize:
        raise ValueError(f"dataset file truncated in sample {index}")
    return _decode_record(blob, manifest.radar_count, index)


# -- parallel generation ---------------------------------------------------

_worker_state: dict = {}


def _pool_init(stl_blobs: dict, array: ArrayConfig, waveform: WaveformSpec,
               rays: RaySpec, master_seed: int):
    _worker_state["meshes"] = {}
    _worker_state["stl"] = stl_blobs
    _worker_state["array"] = array
    _worker_state["waveform"] = waveform
    _worker_state["rays"] = rays
    _worker_state["master_seed"] = master_seed


def _worker_record(info: SampleInfo) -> bytes:
    cache = _worker_state["meshes"]
    if info.target not in cache:
        mesh = load_stl(_worker_state["stl"][info.target])
        cache[info.target] = (mesh, Bvh(mesh))
    mesh, bvh = cache[info.target]
    stack = generate_stack(
        mesh, _worker_state["array"], info.offset_deg, info.elevation_deg,
        NoiseSpec(info.snr_db), _worker_state["waveform"], _worker_state["rays"],
        target=info.target, master_seed=_worker_state["master_seed"], bvh=bvh)
    return _encode_record(stack)


def generate_dataset(meshes: dict, manifest: DatasetManifest, directory, *,
                     workers: int = 1, progress=None) -> Path:
    """Simulate every sample in the manifest and write the dataset files.

    meshes maps target name to TriangleMesh. Records are written in
    manifest order regardless of worker scheduling, so the output bytes
    depend only on the manifest.
    """
    for name in manifest.targets:
        if name not in meshes:
            raise ValueError(f"no mesh supplied for target {name!r}")
    array = ArrayConfig(num_radars=manifest.radar_count,
                        ground_distance_m=manifest.ground_distance_m,
                        elevations_deg=tuple(manifest.elevations_deg))
    waveform = WaveformSpec(**manifest.waveform)
    rays = RaySpec(**manifest.rays)
    stl_blobs = {name: meshes[name].to_stl_bytes() for name in manifest.targets}

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tmp_bin = directory / "dataset.bin.tmp"
    try:
        with open(tmp_bin, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, manifest.sample_count,
                                  manifest.radar_count, IMAGE_SIDE, IMAGE_SIDE))
            if workers <= 1:
                _pool_init(stl_blobs, array, waveform, rays, manifest.master_seed)
                records = map(_worker_record, manifest.samples)
                for done, record in enumerate(records, 1):
                    fh.write(record)
                    if progress:
                        progress(done, manifest.sample_count)
            else:
                with ProcessPoolExecutor(
                        max_workers=workers, initializer=_pool_init,
                        initargs=(stl_blobs, array, waveform, rays,
                                  manifest.master_seed)) as pool:
                    records = pool.map(_worker_record, manifest.samples,
                                       chunksize=8)
                    for done, record in enumerate(records, 1):
                        fh.write(record)
                        if progress:
                            progress(done, manifest.sample_count)
    except Exception:
        tmp_bin.unlink(missing_ok=True)
        raise
    tmp_manifest = directory / "manifest.json.tmp"
    tmp_manifest.write_text(manifest.to_json())
    os.replace(tmp_bin, directory / "dataset.bin")
    os.replace(tmp_manifest, directory / "manifest.json")
    return directory


def render_magnitude_png(image: ComplexImage, dynamic_range_db: float = 40.0) -> np.ndarray:
    """Map image magnitude to 8-bit grayscale over the given dynamic range.

    The peak maps to 255; anything at or below peak minus the dynamic
    range maps to 0, linearly in dB between.
    """
    if not dynamic_range_db > 0:
        raise ValueError("dynamic range must be positive")
    mag = np.abs(image.data)
    peak = mag.max()
    if peak == 0.0:
        raise ValueError("cannot render an all-zero image")
    db = 20.0 * np.log10(np.maximum(mag / peak, 1e-300))
    level = 255.0 * (db + dynamic_range_db) / dynamic_range_db
    return np.clip(np.rint(level), 0, 255).astype(np.uint8)


def save_png(raster: np.ndarray, path) -> None:
    from PIL import Image
    Image.fromarray(raster, mode="L").save(path)
