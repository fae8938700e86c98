from django.conf import settings

from core.management.base import LabCommand, resolve_output
from apps.scene.services import SceneService
from apps.harness.metrics import final_scene_path
from apps.harness.turntable import export_turntable


class Command(LabCommand):
    help = 'Render a saved scene on an evaluation turntable (frame_0000.png onward)'

    config_required = False

    def add_stage_arguments(self, parser):
        parser.add_argument('--scene', required=True, help='Scene checkpoint or run directory')
        parser.add_argument('--frames', type=int, default=36)
        parser.add_argument('--resolution', type=int, default=None)
        parser.add_argument('--elevation', type=float, default=None)

    def run(self, config, seed, options):
        path = final_scene_path(resolve_output(options['scene']))
        scene, _ = SceneService.load(path)
        janus = settings.LAB['JANUS']
        resolution = options.get('resolution') or janus['RESOLUTION']
        elevation = janus['ELEVATION'] if options.get('elevation') is None else options['elevation']
        out = resolve_output(options['out']) if options.get('out') else path.with_name(f"{path.stem}_turntable")
        frames = export_turntable(scene, options['frames'], resolution, out, elevation=elevation,
                                  radius=settings.LAB['RENDER']['RADIUS'])
        return f"Wrote {len(frames)} frames to {out}"
