"""A small benchmark: three synthetic environments, several strategies.

Uses the library API; the same run from the shell is::

    metricdepth synth --preset corridor --frames 30 --out envs/corridor
    metricdepth bench --env corridor=envs/corridor/manifest.json ...
"""

import sys
import tempfile
from pathlib import Path

from metricdepth import bench
from metricdepth.dataset import synthesize_environment
from metricdepth.pipeline import RescaleConfig

frames = int(sys.argv[1]) if len(sys.argv) > 1 else 30
root = Path(tempfile.mkdtemp())
envs = tuple((preset, str(synthesize_environment(root / preset, preset, frames, seed=i)))
             for i, preset in enumerate(('corridor', 'rooms', 'forest')))

names = ('poly1', 'poly3', 'poly5', 'exponential', 'smoothing-spline',
         'monotonic-smoothing-spline', 'monotonic-spline')
spec = bench.BenchmarkSpec(envs, tuple(RescaleConfig.from_name(n) for n in names),
                           out_dir=str(root / 'out'))
result = bench.run_benchmark(spec, jobs=4)
csv_path, table_path = bench.write_outputs(spec, result)
print(table_path.read_text())
print('per-environment rows in', csv_path)
