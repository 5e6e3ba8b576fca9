"""File formats: PLY point clouds, PFM float maps, PNG previews, TUM
trajectories, camera and coefficient JSON, and on-disk scene bundles.

All binary formats are little-endian float32. A scene bundle directory holds
``camera.json``, ``traj.txt`` and per-view maps
(``image_###.pfm``/``.png``, ``radial_###.pfm``, ``rays_###.pfm``,
``normals_###.pfm``, ``unc_###.pfm``); non-positive or non-finite radial
values mark invalid pixels.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .camera import CameraModel, RayField, ScalarMap, camera_from_dict, camera_to_dict
from .errors import InputError
from .pose import Pose


# ---------------------------------------------------------------- PFM

def write_pfm(path, data) -> None:
    """Write a (H, W) or (H, W, 3) float array as little-endian PFM."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise InputError("PFM supports 1- or 3-channel images")
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale = little-endian
        f.write(np.flipud(arr).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise InputError(f"{path}: not a PFM file")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        raw = np.frombuffer(f.read(width * height * channels * 4), dtype=dtype)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(raw.reshape(shape)).astype(float)


# ---------------------------------------------------------------- PLY

def write_ply(path, points, normals=None) -> None:
    """Binary little-endian PLY with float32 x, y, z (+ nx, ny, nz)."""
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    cols = [pts]
    props = ["property float x", "property float y", "property float z"]
    if normals is not None:
        nrm = np.asarray(normals, dtype=np.float32).reshape(-1, 3)
        if nrm.shape[0] != pts.shape[0]:
            raise InputError("normals must pair with points")
        cols.append(nrm)
        props += ["property float nx", "property float ny", "property float nz"]
    body = np.hstack(cols).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"ply\nformat binary_little_endian 1.0\n")
        f.write(f"element vertex {pts.shape[0]}\n".encode("ascii"))
        f.write(("\n".join(props) + "\nend_header\n").encode("ascii"))
        f.write(body.tobytes())


def read_ply(path):
    """Read vertices (and normals if present) from binary-LE or ascii PLY."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise InputError(f"{path}: not a PLY file")
        fmt = None
        count = 0
        props = []
        in_vertex = False
        while True:
            line = f.readline()
            if not line:
                raise InputError(f"{path}: truncated PLY header")
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == b"format":
                fmt = tokens[1]
            elif tokens[0] == b"element":
                in_vertex = tokens[1] == b"vertex"
                if in_vertex:
                    count = int(tokens[2])
            elif tokens[0] == b"property" and in_vertex:
                if tokens[1] != b"float":
                    raise InputError(f"{path}: only float vertex properties supported")
                props.append(tokens[2].decode("ascii"))
            elif tokens[0] == b"end_header":
                break
        if fmt == b"binary_little_endian":
            raw = np.frombuffer(f.read(count * len(props) * 4), dtype="<f4")
            table = raw.reshape(count, len(props)).astype(float)
        elif fmt == b"ascii":
            rows = [f.readline().split()[:len(props)] for _ in range(count)]
            table = np.asarray(rows, dtype=float)
        else:
            raise InputError(f"{path}: unsupported PLY format {fmt!r}")

    def grab(names):
        idx = [props.index(n) for n in names]
        return table[:, idx]

    if not all(n in props for n in ("x", "y", "z")):
        raise InputError(f"{path}: PLY lacks x/y/z vertex properties")
    points = grab(["x", "y", "z"])
    normals = None
    if all(n in props for n in ("nx", "ny", "nz")):
        normals = grab(["nx", "ny", "nz"])
    return points, normals


# ---------------------------------------------------------------- PNG

def write_png(path, image) -> None:
    """8-bit RGB PNG from a float image in [0, 1]."""
    arr = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(path)


def read_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=float) / 255.0


# ---------------------------------------------------------------- TUM trajectories

def write_trajectory(path, ids: Sequence, poses: Sequence[Pose]) -> None:
    """TUM-style lines: id tx ty tz qx qy qz qw (camera-to-world, w-last)."""
    if len(ids) != len(poses):
        raise InputError("ids and poses must pair up")
    with open(path, "w", encoding="ascii") as f:
        for frame_id, pose in zip(ids, poses):
            t = pose.translation
            q = pose.quat()
            values = " ".join(f"{v:.17g}" for v in (*t, *q))
            f.write(f"{frame_id} {values}\n")


def read_trajectory(path):
    ids = []
    poses = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise InputError(f"{path}: malformed trajectory line {line!r}")
            ids.append(parts[0])
            tx, ty, tz, qx, qy, qz, qw = map(float, parts[1:])
            poses.append(Pose.from_quat((qx, qy, qz, qw), (tx, ty, tz)))
    if not ids:
        raise InputError(f"{path}: empty trajectory")
    return ids, poses


# ---------------------------------------------------------------- JSON helpers

def write_json(path, payload) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(dumps_json(payload))


def dumps_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def read_camera(path) -> CameraModel:
    return camera_from_dict(read_json(path))


def write_camera(path, cam: CameraModel) -> None:
    write_json(path, camera_to_dict(cam))


# ---------------------------------------------------------------- scene bundles

def _mask_from_radial(values: np.ndarray) -> np.ndarray:
    return np.isfinite(values) & (values > 0.0)


@dataclass
class SceneBundle:
    cam: CameraModel
    ids: list
    poses: list
    images: list          # (H, W, 3) float arrays
    radials: list         # ScalarMap
    rays: list            # RayField or None
    normals: list         # (H, W, 3) arrays or None
    uncertainties: list   # ScalarMap or None


def view_filenames(index: int) -> dict:
    tag = f"{index:03d}"
    return {
        "image_pfm": f"image_{tag}.pfm",
        "image_png": f"image_{tag}.png",
        "radial": f"radial_{tag}.pfm",
        "rays": f"rays_{tag}.pfm",
        "normals": f"normals_{tag}.pfm",
        "unc": f"unc_{tag}.pfm",
    }


def write_scene_view(directory, index: int, image, radial: ScalarMap,
                     rays: Optional[RayField] = None, normals=None,
                     uncertainty: Optional[ScalarMap] = None) -> None:
    names = view_filenames(index)
    write_pfm(os.path.join(directory, names["image_pfm"]), image)
    write_png(os.path.join(directory, names["image_png"]), image)
    radial_values = np.where(radial.mask, radial.values, 0.0)
    write_pfm(os.path.join(directory, names["radial"]), radial_values)
    if rays is not None:
        dirs = np.where(rays.mask[..., None], rays.dirs, 0.0)
        write_pfm(os.path.join(directory, names["rays"]), dirs)
    if normals is not None:
        write_pfm(os.path.join(directory, names["normals"]), normals)
    if uncertainty is not None:
        unc = np.where(uncertainty.mask, uncertainty.values, np.nan)
        write_pfm(os.path.join(directory, names["unc"]), unc)


def read_scene(directory) -> SceneBundle:
    cam_path = os.path.join(directory, "camera.json")
    traj_path = os.path.join(directory, "traj.txt")
    if not os.path.isfile(cam_path) or not os.path.isfile(traj_path):
        raise InputError(f"{directory}: not a scene bundle (missing camera.json/traj.txt)")
    cam = read_camera(cam_path)
    ids, poses = read_trajectory(traj_path)

    bundle = SceneBundle(cam, ids, poses, [], [], [], [], [])
    for index in range(len(ids)):
        names = view_filenames(index)
        radial_path = os.path.join(directory, names["radial"])
        if not os.path.isfile(radial_path):
            raise InputError(f"{directory}: missing {names['radial']}")
        values = read_pfm(radial_path)
        mask = _mask_from_radial(values)
        bundle.radials.append(ScalarMap(np.where(mask, values, 0.0), mask))

        image_path = os.path.join(directory, names["image_pfm"])
        bundle.images.append(read_pfm(image_path) if os.path.isfile(image_path) else None)

        rays_path = os.path.join(directory, names["rays"])
        if os.path.isfile(rays_path):
            dirs = read_pfm(rays_path)
            norms = np.linalg.norm(dirs, axis=-1)
            ray_mask = np.abs(norms - 1.0) < 1e-3  # float32 storage jitter
            dirs = np.where(ray_mask[..., None], dirs / np.where(norms > 0, norms, 1.0)[..., None], 0.0)
            bundle.rays.append(RayField(dirs, ray_mask))
        else:
            bundle.rays.append(None)

        normals_path = os.path.join(directory, names["normals"])
        bundle.normals.append(read_pfm(normals_path) if os.path.isfile(normals_path) else None)

        unc_path = os.path.join(directory, names["unc"])
        if os.path.isfile(unc_path):
            unc = read_pfm(unc_path)
            unc_mask = np.isfinite(unc)
            bundle.uncertainties.append(ScalarMap(np.where(unc_mask, unc, 0.0), unc_mask))
        else:
            bundle.uncertainties.append(None)
    return bundle


def write_csv_report(path, scene: str, report: dict) -> None:
    """One-row CSV (scene column plus flat metrics) for table assembly."""
    keys = sorted(report.keys())
    with open(path, "w", encoding="ascii") as f:
        f.write("scene," + ",".join(keys) + "\n")
        cells = []
        for key in keys:
            value = report[key]
            cells.append("" if value is None else repr(float(value)))
        f.write(scene + "," + ",".join(cells) + "\n")
