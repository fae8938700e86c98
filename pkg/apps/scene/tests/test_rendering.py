import numpy as np
import pytest
import torch

from core.exceptions import ContractError
from apps.scene.cameras import Camera
from apps.scene.exceptions import EyeInsideGridException, InvalidRenderOptionsException
from apps.scene.grid import Scene, inverse_softplus, logit
from apps.scene.rendering import RenderOptions, orientation_loss, render
from apps.scene.services import SceneService
from .factories import SceneFactory


def empty_scene(grid_size=16, dtype=torch.float64):
    scene = Scene(grid_size=grid_size, dtype=dtype)
    with torch.no_grad():
        scene.density_raw.fill_(float('-inf'))
    return scene


def half_space_scene():
    """Ramp density filling x < 0, its free face looking along +X"""
    scene = Scene(grid_size=17, dtype=torch.float64)
    x = scene.voxel_centers()[..., 0]
    with torch.no_grad():
        scene.density_raw.copy_(inverse_softplus(20.0 * torch.clamp(-x, 0.0, 1.0)))
    return scene


class TestRender:
    def test_empty_scene_is_background(self):
        result = render(empty_scene(), Camera(40.0, 20.0, 3.0), RenderOptions((12, 12), 32))
        assert torch.equal(result.rgb, torch.full((3, 12, 12), 0.5, dtype=torch.float64))
        assert torch.equal(result.opacity, torch.zeros(12, 12, dtype=torch.float64))

    def test_single_saturated_voxel(self):
        scene = empty_scene(grid_size=17)
        with torch.no_grad():
            scene.density_raw[8, 8, 8] = 1000.0
        result = render(scene, Camera(0.0, 0.0, 4.0), RenderOptions((17, 17), 64))
        assert result.opacity[8, 8].item() > 0.99
        assert result.opacity[0, 0].item() < 1e-3

    def test_opaque_uniform_medium(self):
        colour = torch.tensor([0.2, 0.6, 0.9], dtype=torch.float64)
        scene = Scene(grid_size=16, dtype=torch.float64)
        with torch.no_grad():
            scene.density_raw.fill_(50.0)
            scene.color_raw.copy_(logit(colour).expand(16, 16, 16, 3))
        result = render(scene, Camera(30.0, 10.0, 3.0), RenderOptions((15, 15), 64))
        np.testing.assert_allclose(result.rgb[:, 7, 7].numpy(), colour.numpy(), atol=0.01)

    def test_compositing_conservation(self):
        scene = SceneFactory(randomize=4)
        result = render(scene, Camera(80.0, 35.0, 2.5), RenderOptions((10, 10), 48))
        total = result.opacity + result.transmittance
        np.testing.assert_allclose(total.detach().numpy(), np.ones((10, 10)), atol=1e-6)

    def test_colours_stay_in_unit_cube(self):
        scene = SceneFactory(randomize=2)
        rgb = render(scene, Camera(200.0, -20.0, 3.0), RenderOptions((10, 10), 32)).rgb
        assert rgb.min().item() >= 0.0
        assert rgb.max().item() <= 1.0

    def test_finite_difference_gradient(self):
        scene = SceneFactory(randomize=1)
        camera = Camera(30.0, 20.0, 3.0)
        options = RenderOptions((8, 8), 32)

        mean = render(scene, camera, options).rgb.mean()
        (analytic,) = torch.autograd.grad(mean, scene.density_raw)

        generator = torch.Generator().manual_seed(11)
        picks = torch.randint(2, 6, (5, 3), generator=generator)
        step = 1e-3
        for z, y, x in picks.tolist():
            with torch.no_grad():
                original = scene.density_raw[z, y, x].item()
                scene.density_raw[z, y, x] = original + step
                plus = render(scene, camera, options).rgb.mean().item()
                scene.density_raw[z, y, x] = original - step
                minus = render(scene, camera, options).rgb.mean().item()
                scene.density_raw[z, y, x] = original
            numeric = (plus - minus) / (2 * step)
            np.testing.assert_allclose(analytic[z, y, x].item(), numeric, rtol=1e-3, atol=1e-9)

    def test_quarter_turn_symmetry(self):
        scene = Scene(grid_size=16, dtype=torch.float64)
        centres = scene.voxel_centers()
        rho = centres[..., :2].norm(dim=-1)
        z = centres[..., 2]
        with torch.no_grad():
            scene.density_raw.copy_(torch.where((rho < 0.5) & (z.abs() < 0.4), 5.0, -5.0))
            scene.color_raw.copy_(torch.stack([3.0 * z, -3.0 * z, 1.5 * z + rho], dim=-1))
        options = RenderOptions((16, 16), 48)
        frames = [render(scene, Camera(azimuth, 10.0, 3.0), options).rgb for azimuth in (0.0, 90.0, 180.0, 270.0)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert (frames[i] - frames[j]).abs().mean().item() < 0.01

    def test_training_jitter_uses_stream(self):
        from core.rng import StepStreams

        scene = SceneFactory(randomize=3)
        camera = Camera(10.0, 10.0, 3.0)
        options = RenderOptions((8, 8), 16, training=True)
        first = render(scene, camera, options, StepStreams(1, 0).view(0)).rgb
        replay = render(scene, camera, options, StepStreams(1, 0).view(0)).rgb
        other = render(scene, camera, options, StepStreams(1, 1).view(0)).rgb
        assert torch.equal(first, replay)
        assert not torch.equal(first, other)

    def test_eye_inside_grid(self):
        with pytest.raises(EyeInsideGridException):
            render(empty_scene(), Camera(0.0, 0.0, 0.5))

    def test_eye_inside_grid_is_contract_error(self):
        with pytest.raises(ContractError):
            render(empty_scene(), Camera(45.0, 0.0, 1.2))

    @pytest.mark.parametrize('resolution, samples', [((4, 4), 32), ((8, 8), 8)])
    def test_render_option_limits(self, resolution, samples):
        with pytest.raises(InvalidRenderOptionsException):
            RenderOptions(resolution, samples)


class TestOrientationLoss:
    def test_empty_scene(self):
        loss = orientation_loss(empty_scene(), Camera(0.0, 0.0, 3.0), RenderOptions((8, 8), 32))
        assert loss.item() == 0.0

    def test_non_negative(self):
        for seed in range(3):
            loss = orientation_loss(SceneFactory(randomize=seed), Camera(60.0 * seed, 10.0, 3.0),
                                    RenderOptions((8, 8), 32))
            assert loss.item() >= 0.0

    def test_front_face_beats_back_face(self):
        scene = half_space_scene()
        options = RenderOptions((12, 12), 64)
        front = orientation_loss(scene, Camera(0.0, 0.0, 3.0), options).item()
        back = orientation_loss(scene, Camera(180.0, 0.0, 3.0), options).item()
        assert front < back
        assert front < 1e-6
        assert back > 0.5

    def test_differentiable(self):
        scene = SceneFactory(randomize=5)
        loss = orientation_loss(scene, Camera(120.0, 20.0, 3.0), RenderOptions((8, 8), 32))
        (grad,) = torch.autograd.grad(loss, scene.density_raw)
        assert torch.isfinite(grad).all()


class TestSceneService:
    def test_save_and_load(self, tmp_path):
        scene = SceneFactory(randomize=4)
        loaded, metadata = SceneService.load(SceneService.save(scene, tmp_path / 'scene.pt', {'iter': 7}))
        assert metadata['iter'] == 7
        assert metadata['grid']['grid_size'] == 8
        assert loaded.density_raw.dtype == torch.float64
        assert torch.equal(loaded.density_raw, scene.density_raw)
        assert torch.equal(loaded.color_raw, scene.color_raw)
        assert torch.equal(loaded.background, scene.background)
