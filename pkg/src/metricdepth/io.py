"""On-disk formats.

* metric rasters: binary PGM (``P5``, maxval 65535, big-endian samples) in mm
* relative rasters: raw little-endian float32 plus a ``<name>.json`` sidecar
  holding ``{"width": W, "height": H}``
* sparse features: CSV with header ``frame_id,x,y,z``
* pose chains: JSON ``{"WBi": {"rotation": [[...]], "translation": [...]}, ...}``
* intrinsics: JSON ``{"fx", "fy", "cx", "cy", "width", "height"}``
* frame records: JSON of paths (relative to the record file) to the above

Parsing problems raise :class:`FormatError` naming the file and the field.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import (
    CameraIntrinsics,
    FeaturePoint3D,
    MetricDepthImage,
    RelativeDepthImage,
    RigidTransform,
    decode_u16_mm,
    encode_u16_mm,
)
from .geometry import PoseChain


class FormatError(ValueError):
    """A file is missing or does not follow its documented format."""

    def __init__(self, path, detail):
        super().__init__(f'{path}: {detail}')
        self.path = str(path)
        self.detail = detail


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + '\n')


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(path, 'file not found') from None
    except json.JSONDecodeError as exc:
        raise FormatError(path, f'invalid JSON ({exc.msg} at line {exc.lineno})') from None


def _field(obj, key, path):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise FormatError(path, f'missing field {key!r}') from None


# -- rasters ----------------------------------------------------------------------

def write_pgm16(path, raster):
    raster = np.asarray(raster, dtype=np.uint16)
    h, w = raster.shape
    with open(path, 'wb') as fh:
        fh.write(f'P5\n{w} {h}\n65535\n'.encode('ascii'))
        fh.write(raster.astype('>u2').tobytes())


def read_pgm16(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(path, 'file not found') from None
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b'#':
            while pos < len(blob) and blob[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(path, 'truncated PGM header')
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace byte before the samples
    if tokens[0] != b'P5':
        raise FormatError(path, f'magic: expected P5, got {tokens[0]!r}')
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(path, 'header: non-integer width/height/maxval') from None
    if maxval != 65535:
        raise FormatError(path, f'maxval: expected 65535, got {maxval}')
    data = blob[pos:pos + 2 * w * h]
    if len(data) != 2 * w * h:
        raise FormatError(path, f'samples: expected {2 * w * h} bytes, got {len(data)}')
    return np.frombuffer(data, dtype='>u2').reshape(h, w).astype(np.uint16)


def write_metric_pgm(path, img: MetricDepthImage):
    write_pgm16(path, encode_u16_mm(img))


def read_metric_pgm(path) -> MetricDepthImage:
    return decode_u16_mm(read_pgm16(path))


def write_relative_raw(path, img):
    """Write relative depth; invalid pixels are stored as 0."""
    data = img.data if isinstance(img, RelativeDepthImage) else np.asarray(img, dtype=float)
    if isinstance(img, RelativeDepthImage):
        data = np.where(img.valid, data, 0.0)
    h, w = data.shape
    Path(path).write_bytes(np.asarray(data, dtype='<f4').tobytes())
    write_json(str(path) + '.json', {'width': w, 'height': h})


def read_relative_raw(path) -> RelativeDepthImage:
    path = Path(path)
    header_path = Path(str(path) + '.json')
    header = read_json(header_path)
    w, h = int(_field(header, 'width', header_path)), int(_field(header, 'height', header_path))
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(path, 'file not found') from None
    if len(blob) != 4 * w * h:
        raise FormatError(path, f'expected {4 * w * h} bytes for {w}x{h} float32, got {len(blob)}')
    data = np.frombuffer(blob, dtype='<f4').reshape(h, w).astype(float)
    return RelativeDepthImage(data)


# -- features, poses, intrinsics ----------------------------------------------------

def write_features_csv(path, features):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['frame_id', 'x', 'y', 'z'])
        for f in features:
            writer.writerow([f.frame_id] + [repr(float(c)) for c in f.position])


def read_features_csv(path) -> list:
    path = Path(path)
    try:
        fh = open(path, newline='')
    except FileNotFoundError:
        raise FormatError(path, 'file not found') from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ['frame_id', 'x', 'y', 'z']:
            raise FormatError(path, f'header: expected frame_id,x,y,z, got {reader.fieldnames}')
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                pos = [float(row[k]) for k in ('x', 'y', 'z')]
                out.append(FeaturePoint3D(np.array(pos), row['frame_id']))
            except (TypeError, ValueError) as exc:
                raise FormatError(path, f'line {lineno}: {exc}') from None
    return out


def transform_to_dict(T: RigidTransform) -> dict:
    return {'rotation': [[float(v) for v in row] for row in T.rotation],
            'translation': [float(v) for v in T.translation]}


def transform_from_dict(obj, path, name) -> RigidTransform:
    R = np.asarray(_field(obj, 'rotation', f'{path} [{name}]'), dtype=float)
    t = np.asarray(_field(obj, 'translation', f'{path} [{name}]'), dtype=float)
    try:
        return RigidTransform(R.reshape(3, 3), t.reshape(3))
    except ValueError as exc:
        raise FormatError(path, f'{name}: {exc}') from None


def write_pose_chain(path, chain: PoseChain):
    write_json(path, {name: transform_to_dict(T) for name, T in chain.transforms().items()})


def read_pose_chain(path) -> PoseChain:
    obj = read_json(path)
    kwargs = {'T_' + name: transform_from_dict(_field(obj, name, path), path, name)
              for name in PoseChain.NAMES}
    return PoseChain(**kwargs)


def write_intrinsics(path, intr: CameraIntrinsics):
    write_json(path, {'fx': intr.fx, 'fy': intr.fy, 'cx': intr.cx, 'cy': intr.cy,
                      'width': intr.width, 'height': intr.height})


def read_intrinsics(path) -> CameraIntrinsics:
    obj = read_json(path)
    vals = {k: _field(obj, k, path) for k in ('fx', 'fy', 'cx', 'cy', 'width', 'height')}
    try:
        return CameraIntrinsics(float(vals['fx']), float(vals['fy']), float(vals['cx']),
                                float(vals['cy']), int(vals['width']), int(vals['height']))
    except (TypeError, ValueError) as exc:
        raise FormatError(path, str(exc)) from None
