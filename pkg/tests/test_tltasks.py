"""
    test_tltasks.py - test the tlab command-line tasks in tlab/tltasks.py
    To run the test everything simply do:
        pytest tests/test_tltasks.py
    The desk-scale pipeline run is marked slow:
        TLAB_SLOW=1 pytest -m slow tests/test_tltasks.py
"""

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd
import os
import sys
import shutil
import logging
import filecmp
import tempfile
import unittest
import pytest
import numpy as np

# position the script relative to the code
ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
sys.path.append(os.path.join(ROOT_PATH, '..'))
from tlab import tltasks
from tlab import heightField as hf
from tlab.helpers import utils
from tlab.runConfig import read_config


SLOW = os.getenv('TLAB_SLOW', '') == '1'

# A run small enough for the unit tests: one PPO iteration per stage.
TINY_CONFIG = """
[ppo]
total_steps = 64
rollout_steps = 8
batch_size = 8
epochs = 1

[telemetry]
n_steps = 200
discard = 20

[gmm]
windows = 10,20
n_restarts = 1

[report]
histogram_window = 30
histogram_bins = 10
eval_trials = 1
"""


def drop_handlers():
    log = logging.getLogger('tlab')
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()


class TmpRun(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.out = os.path.join(self.tmp, 'run')
        self.conf = os.path.join(self.tmp, 'tiny.ini')
        with open(self.conf, 'w') as fd:
            fd.write(TINY_CONFIG)

    def tearDown(self):
        drop_handlers()
        shutil.rmtree(self.tmp)

    def tlab(self, *args, **kw):
        out = kw.get('out', self.out)
        return tltasks.main(list(args) + ['--config', self.conf, '--out', out])


class TestMain(TmpRun):

    def test_usage(self):
        self.assertEqual(tltasks.main([]), 1)
        self.assertEqual(tltasks.main(['--help']), 0)
        self.assertEqual(tltasks.main(['version']), 0)

    def test_unknown_task_and_option(self):
        self.assertEqual(tltasks.main(['fly']), 1)
        self.assertEqual(tltasks.main(['version', '--colour']), 1)
        self.assertEqual(tltasks.main(['sweep', 'extra', '--out', self.out]), 1)

    def test_gen_terrain(self):
        self.assertEqual(self.tlab('gen-terrain', '--seed', '3'), 0)
        lab = tltasks.TerrainLab(self.out)
        self.assertTrue(os.path.exists(lab.config))
        self.assertTrue(os.path.exists(lab.logfile))
        field = hf.HeightField.load(lab.terrain)
        self.assertEqual(field, hf.generate(seed=3))
        cfg = read_config(lab.config)
        self.assertEqual(cfg.seed, 3)

    def test_gen_terrain_options(self):
        self.assertEqual(self.tlab('gen-terrain', '--roughness', '0.5'), 0)
        field = hf.HeightField.load(tltasks.TerrainLab(self.out).terrain)
        self.assertEqual(field.roughness_scale, 0.5)
        self.assertEqual(self.tlab('gen-terrain', '--roughness', '1.5'), 1)
        self.assertEqual(self.tlab('gen-terrain', '--amplitude', 'tall'), 1)

    def test_validation_errors(self):
        self.assertEqual(self.tlab('train'), 1)                         # no --stage
        self.assertEqual(self.tlab('train', '--stage', 'final'), 1)
        self.assertEqual(self.tlab('train', '--stage', 'initial-flat'), 1)  # no terrain
        self.assertEqual(self.tlab('train', '--stage', 'initial-flat',
                                   '--seed', 'x'), 1)
        self.assertEqual(self.tlab('pipeline', '--stage', 'deploy'), 1)
        with open(os.path.join(self.tmp, 'bad.ini'), 'w') as fd:
            fd.write("[lidar]\nrange = 3\n")
        self.assertEqual(tltasks.main(['sweep', '--config',
                                       os.path.join(self.tmp, 'bad.ini'),
                                       '--out', self.out]), 1)

    def test_missing_artifacts(self):
        self.assertEqual(self.tlab('gen-terrain'), 0)
        self.assertEqual(self.tlab('train', '--stage', 'general'), 1)
        self.assertEqual(self.tlab('collect', '--area', 'flat'), 1)
        self.assertEqual(self.tlab('sweep'), 1)
        self.assertEqual(self.tlab('report'), 1)
        self.assertEqual(self.tlab('evaluate'), 1)


class TestTerrainLab(unittest.TestCase):

    def test_paths(self):
        lab = tltasks.TerrainLab('out')
        self.assertEqual(lab.model('general'), os.path.join('out', 'models', 'general.npz'))
        self.assertEqual(lab.trajectory('rough'),
                         os.path.join('out', 'telemetry', 'trajectory_rough.csv'))
        self.assertEqual(lab.gmm(70), os.path.join('out', 'sweep', 'gmm_w70.json'))
        self.assertEqual(lab.sweep, os.path.join('out', 'sweep', 'sweep.csv'))

    def test_require_names_stage(self):
        lab = tltasks.TerrainLab(tempfile.gettempdir())
        with self.assertRaises(tltasks.tlArtifactError) as cm:
            lab.require(lab.path('no-such-file.csv'), 'collect --area rough')
        self.assertIn('run collect --area rough first', str(cm.exception))


class TestPipeline(TmpRun):

    def test_end_to_end(self):
        self.assertEqual(self.tlab('pipeline', '--seed', '5'), 0)
        lab = tltasks.TerrainLab(self.out)
        for stage in ('initial-flat', 'general'):
            self.assertTrue(os.path.exists(lab.model(stage)))
            log = utils.convert(lab.train_log(stage))
            self.assertEqual(list(log['env_steps']), [72 if stage == 'initial-flat' else 64])

        flat = utils.convert(lab.trajectory('flat'))
        self.assertEqual(len(flat), 180)
        self.assertTrue((flat['sin_theta_x'] == 0.0).all())

        sweep = utils.convert(lab.sweep)
        self.assertEqual(list(sweep['window']), [10, 20])
        model = utils.convert(lab.gmm(20))
        self.assertEqual(model['alignment'], ['flat', 'rough'] if
                         model['means'][0] < model['means'][1] else ['rough', 'flat'])
        for name in ('timeseries_flat.csv', 'timeseries_rough.csv',
                     'histogram_w10.csv', 'histogram_w30.csv', 'accuracy.csv',
                     'confusion.csv', 'feature_separation.csv'):
            self.assertTrue(os.path.exists(lab.report(name)), name)
        table = utils.convert(lab.report('accuracy.csv'))
        self.assertEqual(list(table['window']), [10, 20])
        hist = utils.convert(lab.report('histogram_w30.csv'))
        self.assertEqual(hist['count_flat'].sum(), 180 - 30 + 1)

        # a second run with the same seed reproduces every table
        other = os.path.join(self.tmp, 'again')
        self.assertEqual(self.tlab('pipeline', '--seed', '5', out=other), 0)
        for sub in ('sweep', 'report'):
            names = sorted(os.listdir(os.path.join(self.out, sub)))
            match, mismatch, errors = filecmp.cmpfiles(
                os.path.join(self.out, sub), os.path.join(other, sub), names,
                shallow=False)
            self.assertEqual((mismatch, errors), ([], []))

        # evaluation over both stages plus the random baseline
        self.assertEqual(self.tlab('evaluate', '--seed', '5'), 0)
        cross = utils.convert(lab.report('cross_evaluation.csv'))
        self.assertEqual(len(cross), 6)
        self.assertEqual(sorted(set(cross['model'])), ['general', 'initial-flat', 'random'])

    def test_resume_and_single_stage(self):
        self.assertEqual(self.tlab('pipeline'), 0)
        lab = tltasks.TerrainLab(self.out)
        model_time = os.path.getmtime(lab.model('general'))
        traj_time = os.path.getmtime(lab.trajectory('rough'))
        os.remove(lab.sweep)
        self.assertEqual(self.tlab('pipeline', '--resume'), 0)
        self.assertTrue(os.path.exists(lab.sweep))
        self.assertEqual(os.path.getmtime(lab.model('general')), model_time)
        self.assertEqual(self.tlab('pipeline', '--stage', 'sweep'), 0)
        self.assertEqual(os.path.getmtime(lab.trajectory('rough')), traj_time)

    def test_empty_trajectory(self):
        self.assertEqual(self.tlab('pipeline'), 0)
        lab = tltasks.TerrainLab(self.out)
        self.assertEqual(self.tlab('collect', '--area', 'rough', '--steps', '20',
                                   '--discard', '20'), 0)
        self.assertEqual(len(utils.convert(lab.trajectory('rough'))), 0)
        self.assertEqual(self.tlab('report'), 1)
        self.assertEqual(self.tlab('sweep'), 1)


@pytest.mark.slow
@pytest.mark.skipif(not SLOW, reason="set TLAB_SLOW=1 for the full pipeline")
def test_desk_scale_pipeline():
    """Default budgets: the pitch feature separates the two areas, the
    accuracy does not drop as the window grows and the calibrated rough
    amplitude lands in the band"""
    tmp = tempfile.mkdtemp()
    try:
        out = os.path.join(tmp, 'run')
        assert tltasks.main(['pipeline', '--seed', '7', '--out', out]) == 0
        lab = tltasks.TerrainLab(out)
        sweep = utils.convert(lab.sweep)
        assert list(sweep['window']) == [10, 20, 40, 70]
        assert (sweep['mean_flat'] < sweep['mean_rough']).all()
        assert np.all(np.diff(sweep['accuracy'].values) >= 0.0), \
            list(sweep['accuracy'])
        assert sweep['accuracy'].iloc[-1] >= 0.9
        flat = utils.convert(lab.trajectory('flat'))
        assert np.all(flat['sin_theta_x'] == 0.0)

        assert tltasks.main(['calibrate', '--seed', '7', '--out', out]) == 0
        table = utils.convert(lab.calibration)
        assert table['in_band'].any()
        chosen = table[table['in_band']]['mean_std']
        assert ((chosen >= 0.05) & (chosen <= 0.20)).all()
    finally:
        drop_handlers()
        shutil.rmtree(tmp)
