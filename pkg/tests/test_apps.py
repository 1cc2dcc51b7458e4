import dataclasses
import json
import sys

import numpy as np
import pytest

from flipblur.apps import blur, verify
from flipblur.apps.blur import cmd_blur
from flipblur.apps.deblur import cmd_deblur, run_name
from flipblur.apps.grid import cmd_grid, grid_configs
from flipblur.apps.spectrum import cmd_spectrum
from flipblur.lib.boundary_ops import BcKind, BlurOperator, observe
from flipblur.lib.config import build_config
from flipblur.lib.errors import UsageError
from flipblur.lib.image import synth_image
from flipblur.lib.krylov import SolverKind, StopReason
from flipblur.lib.psf_symbol import read_psf


def tree_bytes(root):
    return {str(path.relative_to(root)): path.read_bytes() for path in sorted(root.rglob("*")) if path.is_file()}


class TestBlur:
    def test_outputs(self, tmp_path):
        config = build_config(size=(16, 16), output_dir=str(tmp_path))
        result = cmd_blur(config)
        for name in ("truth.npy", "blurred.npy", "blurred.pgm", "psf.txt", "blurred.json"):
            assert (tmp_path / name).is_file()
        assert (tmp_path / "blurred.pgm").read_bytes().startswith(b"P5")
        sidecar = json.loads((tmp_path / "blurred.json").read_text())
        assert sidecar["shape"] == [16, 16]
        assert sidecar["scene_shape"] == [22, 22]
        assert sidecar["delta"] == pytest.approx(0.01 * sidecar["blurred_norm"], rel=1e-12)

        psf = read_psf(tmp_path / "psf.txt")
        exact = observe(psf, synth_image("blob", (16, 16), margin=psf.m))
        np.testing.assert_array_equal(result.truth, synth_image("blob", (16, 16)))
        assert np.linalg.norm(exact) == pytest.approx(result.blurred_norm, rel=1e-12)
        assert np.linalg.norm(result.blurred - exact) == pytest.approx(result.delta, rel=1e-10)

    @pytest.mark.parametrize("bc", list(BcKind))
    def test_blob_data_fit_every_boundary_condition(self, tmp_path, bc):
        result = cmd_blur(build_config(size=(64, 64), output_dir=str(tmp_path)))
        psf = read_psf(tmp_path / "psf.txt")
        exact = observe(psf, synth_image("blob", (64, 64), margin=psf.m))
        model_error = np.linalg.norm(BlurOperator(psf, bc, (64, 64)).apply(result.truth) - exact)
        assert model_error < 0.05 * result.delta

    def test_ramp_data_follow_no_boundary_condition(self, tmp_path):
        result = cmd_blur(build_config(synth="ramp", size=(16, 16), gamma=0.0, output_dir=str(tmp_path)))
        psf = read_psf(tmp_path / "psf.txt")
        errors = {
            bc: np.abs(BlurOperator(psf, bc, (16, 16)).apply(result.truth) - result.blurred).max() for bc in BcKind
        }
        # a ramp continues linearly past the edges, which only the anti-reflective rule reproduces
        assert errors[BcKind.ANTIREFLECTIVE] < 1e-13
        assert min(errors[bc] for bc in (BcKind.ZERO, BcKind.PERIODIC, BcKind.REFLECTIVE)) > 1e-3

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            cmd_blur(build_config(size=(12, 12), gamma=0.05, seed=4, output_dir=str(tmp_path / name)))
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_constant_image_is_preserved(self, tmp_path):
        np.save(tmp_path / "flat.npy", np.full((20, 22), 0.4))
        config = build_config(image_path=str(tmp_path / "flat.npy"), gamma=0.0, output_dir=str(tmp_path / "out"))
        result = cmd_blur(config)
        assert result.truth.shape == (14, 16)
        np.testing.assert_allclose(result.blurred, result.truth, atol=1e-13)
        np.testing.assert_allclose(result.truth, 0.4)
        assert result.delta == 0.0

    def test_image_file_is_the_scene(self, tmp_path):
        scene = np.random.default_rng(2).random((15, 15))
        np.save(tmp_path / "scene.npy", scene)
        config = build_config(image_path=str(tmp_path / "scene.npy"), psf_radius=2, output_dir=str(tmp_path / "out"))
        np.testing.assert_array_equal(cmd_blur(config).truth, scene[2:-2, 2:-2])

    def test_one_dimensional(self, tmp_path):
        np.save(tmp_path / "signal.npy", np.linspace(0.1, 0.9, 20))
        config = build_config(image_path=str(tmp_path / "signal.npy"), output_dir=str(tmp_path / "out"))
        assert cmd_blur(config).blurred.shape == (14,)
        assert read_psf(tmp_path / "out" / "psf.txt").dims == 1

    def test_scene_too_small(self, tmp_path):
        np.save(tmp_path / "small.npy", np.ones((10, 10)))
        with pytest.raises(UsageError):
            cmd_blur(build_config(image_path=str(tmp_path / "small.npy"), output_dir=str(tmp_path / "out")))

    def test_main_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr(sys, "argv", ["flipblur-blur", "--gamma", "-1", "--out", str(tmp_path)])
        with pytest.raises(SystemExit) as info:
            blur.main()
        assert info.value.code == 2


class TestDeblur:
    def test_identity_psf_restores_exactly(self, tmp_path):
        config = build_config(psf_kind="gaussian", psf_radius=0, gamma=0.0, size=(16, 16), flip=False, output_dir=str(tmp_path))
        cmd_blur(config)
        result = cmd_deblur(config)
        assert result.history.iterations == 1
        assert result.best.iter == 1
        assert result.best.rre < 1e-12
        assert result.run_dir == tmp_path / "reflective-noflip-gmres"

    def test_flipped_minres(self, tmp_path):
        config = build_config(
            psf_kind="gaussian", psf_radius=0, gamma=0.0, size=(8, 8), solver="minres", output_dir=str(tmp_path)
        )
        cmd_blur(config)
        result = cmd_deblur(config)
        assert result.best.rre < 1e-10
        assert result.best.iter <= 2

    def test_outputs(self, tmp_path):
        config = build_config(size=(16, 16), max_iter=12, output_dir=str(tmp_path))
        cmd_blur(config)
        result = cmd_deblur(config)
        run_dir = tmp_path / run_name(config)
        assert result.run_dir == run_dir
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert set(metrics) == {"best", "discrepancy"}
        assert set(metrics["best"]) == {"rre", "psnr", "iter"}
        assert (run_dir / "restored_best.pgm").is_file()
        history = (run_dir / "history.csv").read_text().splitlines()
        assert history[0] == "iter,residual_norm,rre"
        assert len(history) == result.history.iterations + 2
        run = json.loads((run_dir / "run.json").read_text())
        assert run["solver"] == "gmres"
        assert run["delta"] == result.delta

    def test_separate_input_directory(self, tmp_path):
        cmd_blur(build_config(size=(12, 12), output_dir=str(tmp_path / "blurred")))
        config = build_config(size=(12, 12), max_iter=5, input_dir=str(tmp_path / "blurred"), output_dir=str(tmp_path / "runs"))
        assert cmd_deblur(config).run_dir.parent == tmp_path / "runs"

    def test_missing_blur_outputs(self, tmp_path):
        with pytest.raises(UsageError):
            cmd_deblur(build_config(output_dir=str(tmp_path)))

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            config = build_config(size=(16, 16), bc="antireflective", max_iter=10, output_dir=str(tmp_path / name))
            cmd_blur(config)
            cmd_deblur(config)
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


class TestSpectrum:
    def test_flipped_zero_is_real(self, tmp_path):
        config = build_config(
            bc="zero", psf_kind="speckle", psf_radius=1, sizes=[(6, 6), (8, 8)], output_dir=str(tmp_path)
        )
        summaries = cmd_spectrum(config)
        assert [s.size for s in summaries] == [(6, 6), (8, 8)]
        for s in summaries:
            assert s.nonreal_flip == 0
            assert s.asymmetry_flip < 1e-13
            assert s.trace_norm == 0.0
        for name in ("eig_6x6_plain.csv", "eig_6x6_flip.csv", "psi_8x8.csv", "wnorms.csv", "psf_2d.txt", "summary.json"):
            assert (tmp_path / name).is_file()
        assert (tmp_path / "wnorms.csv").read_text().splitlines()[0].startswith("size,trace_norm,spectral_norm")

    def test_psf_crop(self, tmp_path):
        config = build_config(
            bc="zero", psf_kind="speckle", psf_radius=3, psf_crop=1, sizes=[(4, 4)], output_dir=str(tmp_path)
        )
        (summary,) = cmd_spectrum(config)
        assert summary.nonreal_flip == 0
        assert read_psf(tmp_path / "psf_2d.txt").m == 1

    def test_crop_wider_than_psf(self, tmp_path):
        with pytest.raises(UsageError):
            cmd_spectrum(build_config(psf_radius=1, psf_crop=2, sizes=[(8, 8)], output_dir=str(tmp_path)))

    def test_reflective_correction_constant_in_size(self, tmp_path):
        config = build_config(bc="reflective", psf_kind="motion", psf_radius=2, sizes=["16", "32"], output_dir=str(tmp_path))
        small, large = cmd_spectrum(config)
        assert small.trace_norm == pytest.approx(large.trace_norm, rel=1e-10)


class TestVerifyApp:
    def test_list(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "argv", ["flipblur-verify", "--list"])
        verify.main()
        assert "antireflective_corner_formula" in capsys.readouterr().out.splitlines()

    def test_unknown_check_exit_code(self, monkeypatch):
        monkeypatch.setattr(sys, "argv", ["flipblur-verify", "no_such_check"])
        with pytest.raises(SystemExit) as info:
            verify.main()
        assert info.value.code == 2


class TestGrid:
    def test_configs(self):
        config = build_config(output_dir="out", solvers=["gmres", "minres"])
        configs = grid_configs(config)
        assert len(configs) == 16
        assert {(c.bc, c.flip, c.solver) for c in configs} == {
            (bc, flip, solver) for bc in BcKind for flip in (False, True) for solver in SolverKind
        }
        assert all(str(c.source_dir) == "out" for c in configs)

    def test_table(self, tmp_path):
        rows = cmd_grid(build_config(size=(12, 12), max_iter=8, output_dir=str(tmp_path)))
        assert len(rows) == 8
        table = (tmp_path / "table.csv").read_text().splitlines()
        assert table[0].startswith("bc,flip,solver,best_rre")
        assert len(table) == 9


@pytest.fixture(scope="module")
def restoration_grid(tmp_path_factory):
    config = build_config(
        synth="blob", size=(64, 64), psf_kind="motion", psf_radius=3, gamma=0.01, seed=0, max_iter=100,
        output_dir=str(tmp_path_factory.mktemp("grid")),
    )
    return config, {(row.bc, row.flip): row.result for row in cmd_grid(config)}


@pytest.mark.slow
class TestRestorationProtocol:
    @pytest.mark.parametrize("bc", list(BcKind))
    def test_flip_improves_best_error(self, restoration_grid, bc):
        _, rows = restoration_grid
        assert rows[(bc, True)].best.rre < rows[(bc, False)].best.rre

    @pytest.mark.parametrize("bc", list(BcKind))
    def test_discrepancy_close_to_best(self, restoration_grid, bc):
        _, rows = restoration_grid
        result = rows[(bc, True)]
        assert result.discrepancy is not None
        assert result.discrepancy.rre <= 1.25 * result.best.rre

    @pytest.mark.parametrize("bc", list(BcKind))
    def test_semiconvergence(self, restoration_grid, bc):
        _, rows = restoration_grid
        history = rows[(bc, False)].history
        assert history.rre_per_iter[history.best_iter] < history.rre_per_iter[-1]

    def test_unflipped_zero_misses_discrepancy(self, restoration_grid):
        _, rows = restoration_grid
        assert rows[(BcKind.ZERO, True)].discrepancy is not None
        assert rows[(BcKind.ZERO, False)].discrepancy is None

    def test_antireflective_stops_only_when_flipped(self, restoration_grid, tmp_path):
        config, rows = restoration_grid
        unflipped = rows[(BcKind.ANTIREFLECTIVE, False)].history
        assert unflipped.iterations == config.max_iter
        assert unflipped.discrepancy_iter is None

        halting = dataclasses.replace(
            config, bc=BcKind.ANTIREFLECTIVE, flip=True, halt_at_discrepancy=True,
            input_dir=config.output_dir, output_dir=str(tmp_path),
        )
        flipped = cmd_deblur(halting).history
        assert flipped.stopped_by is StopReason.DISCREPANCY
        assert flipped.iterations == rows[(BcKind.ANTIREFLECTIVE, True)].history.discrepancy_iter
