import json

import numpy as np
import pytest

from metricdepth import io
from metricdepth.core import CameraIntrinsics, FeaturePoint3D, MetricDepthImage, RelativeDepthImage, RigidTransform
from metricdepth.geometry import PoseChain


def test_pgm_layout_is_big_endian(tmp_path):
    p = tmp_path / 'a.pgm'
    io.write_pgm16(p, np.array([[1, 258], [65535, 0]], dtype=np.uint16))
    blob = p.read_bytes()
    assert blob.startswith(b'P5\n2 2\n65535\n')
    assert blob[len(b'P5\n2 2\n65535\n'):] == b'\x00\x01\x01\x02\xff\xff\x00\x00'


def test_pgm_reader_handles_comments(tmp_path):
    p = tmp_path / 'c.pgm'
    p.write_bytes(b'P5\n# made elsewhere\n1 1\n65535\n\x03\xe8')
    assert io.read_metric_pgm(p).data[0, 0] == 1.0


@pytest.mark.parametrize('blob, detail', [
    (b'P2\n1 1\n65535\n\x00\x01', 'magic'),
    (b'P5\n1 1\n255\n\x01', 'maxval'),
    (b'P5\n2 2\n65535\n\x00\x01', 'samples'),
])
def test_pgm_errors_name_the_field(tmp_path, blob, detail):
    p = tmp_path / 'bad.pgm'
    p.write_bytes(blob)
    with pytest.raises(io.FormatError) as err:
        io.read_pgm16(p)
    assert err.value.detail.startswith(detail) and err.value.path == str(p)


def test_metric_pgm_round_trip(tmp_path):
    img = MetricDepthImage(np.array([[1.2344, 0.0], [64.9996, 7.0]]))
    io.write_metric_pgm(tmp_path / 'm.pgm', img)
    back = io.read_metric_pgm(tmp_path / 'm.pgm')
    assert back.valid.tolist() == [[True, False], [True, True]]
    np.testing.assert_allclose(back.data[back.valid], [1.234, 65.0, 7.0])


def test_relative_raw_round_trip(tmp_path):
    valid = np.array([[True, False, True]])
    img = RelativeDepthImage(np.array([[0.5, 9.0, 2.25]]), valid)
    p = tmp_path / 'r.f32'
    io.write_relative_raw(p, img)
    assert json.loads((tmp_path / 'r.f32.json').read_text()) == {'height': 1, 'width': 3}
    assert p.read_bytes() == np.array([0.5, 0.0, 2.25], dtype='<f4').tobytes()
    back = io.read_relative_raw(p)
    assert back.valid.tolist() == valid.tolist()
    np.testing.assert_array_equal(back.data, [[0.5, 0.0, 2.25]])


def test_relative_raw_size_mismatch(tmp_path):
    p = tmp_path / 'r.f32'
    p.write_bytes(b'\x00' * 8)
    io.write_json(str(p) + '.json', {'width': 3, 'height': 1})
    with pytest.raises(io.FormatError):
        io.read_relative_raw(p)
    io.write_json(str(p) + '.json', {'width': 3})
    with pytest.raises(io.FormatError, match="missing field 'height'"):
        io.read_relative_raw(p)


def test_features_round_trip_is_exact(tmp_path):
    feats = [FeaturePoint3D([0.1, -2.0 / 3.0, 4.000000000000001], 'kf'), FeaturePoint3D([1, 2, 3], '7')]
    io.write_features_csv(tmp_path / 'f.csv', feats)
    back = io.read_features_csv(tmp_path / 'f.csv')
    assert back == feats


def test_features_bad_header_and_value(tmp_path):
    p = tmp_path / 'f.csv'
    p.write_text('id,x,y,z\n')
    with pytest.raises(io.FormatError, match='header'):
        io.read_features_csv(p)
    p.write_text('frame_id,x,y,z\nkf,1,two,3\n')
    with pytest.raises(io.FormatError, match='line 2'):
        io.read_features_csv(p)


def test_pose_chain_round_trip_and_missing_field(tmp_path):
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    chain = PoseChain(RigidTransform(R, [1, 2, 3]))
    io.write_pose_chain(tmp_path / 'p.json', chain)
    assert io.read_pose_chain(tmp_path / 'p.json') == chain
    obj = json.loads((tmp_path / 'p.json').read_text())
    del obj['BjCj']['translation']
    (tmp_path / 'p.json').write_text(json.dumps(obj))
    with pytest.raises(io.FormatError, match=r"\[BjCj\].*missing field 'translation'"):
        io.read_pose_chain(tmp_path / 'p.json')


def test_pose_chain_rejects_non_rotation(tmp_path):
    obj = {n: io.transform_to_dict(RigidTransform.identity()) for n in PoseChain.NAMES}
    obj['WBi']['rotation'] = [[2, 0, 0], [0, 1, 0], [0, 0, 1]]
    io.write_json(tmp_path / 'p.json', obj)
    with pytest.raises(io.FormatError, match='WBi'):
        io.read_pose_chain(tmp_path / 'p.json')


def test_intrinsics_round_trip(tmp_path):
    intr = CameraIntrinsics(40.0, 41.0, 31.5, 30.5, 64, 62)
    io.write_intrinsics(tmp_path / 'i.json', intr)
    assert io.read_intrinsics(tmp_path / 'i.json') == intr


def test_missing_and_malformed_json(tmp_path):
    with pytest.raises(io.FormatError, match='file not found'):
        io.read_json(tmp_path / 'nope.json')
    (tmp_path / 'bad.json').write_text('{"fx": ')
    with pytest.raises(io.FormatError, match='invalid JSON'):
        io.read_intrinsics(tmp_path / 'bad.json')
