"""Smoke test for the delmap_py extension module.

Build first, then point PYTHONPATH at a directory holding `delmap_py.so`:

    cargo build -p delmap-py --features extension-module --release
    mkdir -p /tmp/delmap && cp target/release/libdelmap_py.so /tmp/delmap/delmap_py.so
    PYTHONPATH=/tmp/delmap python3 python/smoke_test.py
"""

import random
import tempfile

import delmap_py as dm


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_geodesy():
    origin = (30.45, -91.15, 10.0)
    e, n, u = dm.geodetic_to_enu(origin, origin)
    assert max(abs(e), abs(n), abs(u)) < 1e-6
    lat, lon, alt = dm.enu_to_geodetic((1200.0, -340.0, 25.0), origin)
    back = dm.geodetic_to_enu((lat, lon, alt), origin)
    assert all(close(a, b, 1e-6) for a, b in zip(back, (1200.0, -340.0, 25.0)))
    try:
        dm.geodetic_to_enu((91.0, 0.0, 0.0), origin)
    except ValueError:
        pass
    else:
        raise AssertionError("latitude out of range accepted")


def test_polygons():
    sq = dm.Polygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert close(sq.area, 100.0)
    area, aspect = dm.Polygon([(0, 0), (40, 0), (40, 10), (0, 10)]).min_area_rect()
    assert close(area, 400.0) and close(aspect, 4.0)
    shifted = dm.Polygon([(5, 5), (15, 5), (15, 15), (5, 15)])
    parts = sq.intersection(shifted)
    assert len(parts) == 1 and close(parts[0].area, 25.0)
    assert sq.is_simple() and len(sq) == 4


def test_homography():
    h = dm.Homography([[2.0, 0.1, 10.0], [0.05, 1.5, -5.0], [1e-4, 2e-4, 1.0]])
    rng = random.Random(1)
    rows = []
    for _ in range(60):
        u, v = rng.uniform(0, 640), rng.uniform(0, 480)
        x, y = h.project(u, v)
        rows.append((u, v, x, y))
    for i in range(0, 60, 6):
        u, v, x, y = rows[i]
        rows[i] = (u, v, x + 500.0, y - 300.0)

    exact = dm.estimate_dlt(rows[1:5])
    x, y = exact.project(*rows[1][:2])
    assert close(x, rows[1][2], 1e-6) and close(y, rows[1][3], 1e-6)

    r = dm.estimate_homography(rows, image_id="img", seed=7)
    assert r.image_id == "img" and r.correspondence_count == 60
    assert r.inlier_count == 50 and r.retained
    assert r.rms_error < 1e-6
    again = dm.estimate_homography(rows, image_id="img", seed=7)
    assert again.homography.matrix() == r.homography.matrix()
    u, v = r.homography.inverse().project(*h.project(100.0, 200.0))
    assert close(u, 100.0, 1e-6) and close(v, 200.0, 1e-6)


def test_plane():
    rng = random.Random(2)
    pts = [(rng.uniform(-50, 50), rng.uniform(-50, 50), 0.0) for _ in range(100)]
    pts += [(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(20, 40)) for _ in range(10)]
    normal, offset, inliers = dm.fit_plane(pts, inlier_dist=0.5, seed=3)
    assert abs(abs(normal[2]) - 1.0) < 1e-9 and abs(offset) < 1e-9
    assert inliers == list(range(100))


def test_cam():
    k, h, w = 2, 4, 4
    feats = [0.0] * (k * h * w)
    feats[1 * 4 + 1] = 1.0  # channel 0, row 1, col 1
    polys = dm.cam_polygons(feats, (k, h, w), [1.0, 0.0], (64, 64), tau=0.1, min_region_px=1)
    assert len(polys) == 1
    poly, pixels = polys[0]
    assert pixels > 0 and abs(poly.area - pixels) < 0.05 * pixels


def test_labels():
    rows = [("a", 2, 3), ("b", 1, 3), ("c", 3, 3)]
    assert dm.aggregate_labels(rows, "A") == {"a": True, "b": False, "c": True}
    assert dm.aggregate_labels(rows, "B") == {"a": False, "b": False, "c": True}
    try:
        dm.aggregate_labels([("x", 4, 3)], "A")
    except ValueError:
        pass
    else:
        raise AssertionError("votes above workers accepted")


def test_pipeline():
    with tempfile.TemporaryDirectory() as d:
        cfg = dm.generate_scene(d + "/scene", seed=5)
        manifest, report = dm.run_pipeline(cfg, d + "/out")
        assert manifest["counts"]["retained"] > 0
        assert report["cam"]["precision"] > 0.9
        with open(d + "/out/estimate_cam.geojson") as f:
            assert '"FeatureCollection"' in f.read()
        try:
            dm.run_pipeline(d + "/missing.toml")
        except ValueError as e:
            assert "missing.toml" in str(e)
        else:
            raise AssertionError("missing config accepted")


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok  {t.__name__}")
    print(f"{len(tests)} passed")
