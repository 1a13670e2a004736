"""Deterministic multi-radar ISAR image simulation toolkit.

Pipeline: STL mesh -> ray-traced specular returns -> stepped-frequency
phase history -> calibrated noise -> 54x54 complex range-Doppler image ->
multi-radar dataset files.
"""

__version__ = "0.1.0"

from .mesh import TriangleMesh, load_stl, rotate_mesh
from .geometry import ArrayConfig, RadarPose, enumerate_offsets, radar_azimuths, slant_geometry
from .scattering import Bvh, RaySpec, ScatterReturn, build_bvh, trace_returns
from .imaging import ComplexImage, PhaseHistory, WaveformSpec, form_image, synthesize_phase_history
from .noise import NoiseSpec, add_noise, derive_seed
from .array_dataset import (
    DatasetManifest,
    ImageStack,
    class_table,
    enumerate_dataset,
    generate_dataset,
    generate_stack,
    read_dataset,
    render_magnitude_png,
    write_dataset,
)

__all__ = [
    "TriangleMesh", "load_stl", "rotate_mesh",
    "ArrayConfig", "RadarPose", "slant_geometry", "radar_azimuths", "enumerate_offsets",
    "Bvh", "RaySpec", "ScatterReturn", "build_bvh", "trace_returns",
    "WaveformSpec", "PhaseHistory", "ComplexImage", "synthesize_phase_history", "form_image",
    "NoiseSpec", "add_noise", "derive_seed",
    "ImageStack", "DatasetManifest", "class_table", "generate_stack", "enumerate_dataset",
    "generate_dataset", "write_dataset", "read_dataset", "render_magnitude_png",
]
