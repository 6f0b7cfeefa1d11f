#!/usr/bin/env python
#
# HEIGHTFIELD -- Procedural flat/rough terrain and height/slope queries.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Procedural terrain for the rover simulator.

    A HeightField is a single-valued height function sampled on a uniform
    X-Z lattice.  It carries two named rectangles: a flat area, which is
    an exactly constant plane at the base elevation, and a rough area,
    which carries multi-octave value noise whose amplitude is scaled by
    `roughness_scale`.  Outside the rough area the noise fades smoothly
    to the base plane.

    Terrain Interface
    -----------------

          field = generate  (flat_rect, rough_rect, roughness_scale,
                             amplitude, seed, **kw)
          height = height_at (field, x, z)
          slope = slope_at  (field, x, z)
          label = area_of   (flat_rect, rough_rect, x, z)

          field.save (path)
          field = HeightField.load (path)

Import via

.. code-block:: python

    from tlab import heightField
'''

import logging
from collections import namedtuple

import numpy as np

from tlab.Util import tlConfigError, ParamSet
from tlab.Util import check_positive, check_range, parse_floats


logger = logging.getLogger('tlab.heightField')

# Version of the terrain file layout written by HeightField.save().
FORMAT_VERSION = 1

# Area labels.
FLAT = 'flat'
ROUGH = 'rough'
NEITHER = 'neither'

# Queries this close outside the lattice are treated as on the edge.
EXTENT_TOL = 1e-9


# ###################################
#  Terrain error classes
# ###################################

class tlTerrainError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class tlExtentError(tlTerrainError):
    '''Raised for a query outside the lattice extent.
    '''
    pass


# ###################################
#  Area rectangles
# ###################################

AreaRect = namedtuple('AreaRect', ['x_min', 'x_max', 'z_min', 'z_max', 'label'])
AreaRect.__doc__ = '''Axis-aligned rectangle on the X-Z plane (meters).'''

# Areas of the cave survey, (x, z) corners listed clockwise from upper right.
FLAT_RECT = AreaRect(-2.5, 0.5, -1.0, 0.5, FLAT)
ROUGH_RECT = AreaRect(-9.0, -7.5, 1.5, 5.0, ROUGH)


def make_rect(x_min, x_max, z_min, z_max, label):
    '''Build and validate an AreaRect.'''
    rect = AreaRect(float(x_min), float(x_max), float(z_min), float(z_max), label)
    check_rect(rect)
    return rect


def check_rect(rect):
    if not (rect.x_min < rect.x_max and rect.z_min < rect.z_max):
        raise tlConfigError("Degenerate %s rect %s" % (rect.label, tuple(rect[:4])))
    if rect.label not in (FLAT, ROUGH):
        raise tlConfigError("Rect label must be '%s' or '%s', got %r" %
                            (FLAT, ROUGH, rect.label))
    return rect


def rects_overlap(a, b):
    '''True if two rectangles share any interior or boundary point.'''
    return not (a.x_max < b.x_min or b.x_max < a.x_min or
                a.z_max < b.z_min or b.z_max < a.z_min)


def in_rect(rect, x, z, margin=0.0):
    '''True if (x, z) lies in rect shrunk by `margin` (negative grows it).'''
    return (rect.x_min + margin <= x <= rect.x_max - margin and
            rect.z_min + margin <= z <= rect.z_max - margin)


def _rect_parser(label):
    def parse(text):
        vals = parse_floats(text)
        if len(vals) != 4:
            raise tlConfigError("A rect needs x_min,x_max,z_min,z_max; got '%s'" % text)
        return make_rect(vals[0], vals[1], vals[2], vals[3], label)
    return parse


# --------------------------------------------------------------------
# AREA_OF -- Ground-truth label of a planar point.  Used for evaluation
# only; the classifier never sees it.
#
def area_of(flat_rect, rough_rect, x, z):
    '''Return 'flat', 'rough' or 'neither' for the point (x, z).

    Rect bounds are inclusive.
    '''
    if in_rect(flat_rect, x, z):
        return FLAT
    if in_rect(rough_rect, x, z):
        return ROUGH
    return NEITHER


# ###################################
#  Terrain parameters
# ###################################

class TerrainParams(ParamSet):
    '''Parameters of generate(), read from the [terrain] config section.
    '''
    FIELDS = (
        ('flat_rect',       _rect_parser(FLAT),  FLAT_RECT),
        ('rough_rect',      _rect_parser(ROUGH), ROUGH_RECT),
        ('roughness_scale', float, 0.8),
        ('amplitude',       float, 0.05),       # m
        ('cell_size',       float, 0.02),       # m
        ('margin',          float, 0.5),        # m around the rect union
        ('base',            float, 0.0),        # m
        ('octaves',         int,   4),
        ('persistence',     float, 0.5),
        ('lacunarity',      float, 2.0),
        ('feature_size',    float, 0.25),       # m, coarsest lattice spacing
        ('blend',           float, 0.5),        # m, roughness fall-off
        ('flat_collar',     float, 0.1),        # m, forced-flat ring
    )

    def validate(self):
        check_rect(self.flat_rect)
        check_rect(self.rough_rect)
        if rects_overlap(self.flat_rect, self.rough_rect):
            raise tlConfigError("Flat and rough rects overlap")
        check_range('roughness_scale', self.roughness_scale, 0.0, 1.0)
        check_positive('amplitude', self.amplitude)
        check_positive('cell_size', self.cell_size)
        check_range('margin', self.margin, 0.0, float('inf'))
        check_range('base', self.base, -1e6, 1e6)
        if int(self.octaves) < 1:
            raise tlConfigError("'octaves' must be >= 1, got %r" % self.octaves)
        check_range('persistence', self.persistence, 0.0, 1.0, lo_open=True)
        check_range('lacunarity', self.lacunarity, 1.0, float('inf'), lo_open=True)
        check_positive('feature_size', self.feature_size)
        check_positive('blend', self.blend)
        check_range('flat_collar', self.flat_collar, 0.0, float('inf'))
        return self

    def to_strings(self):
        out = ParamSet.to_strings(self)
        return [(k, ','.join(repr(v) for v in getattr(self, k)[:4])
                 if k.endswith('_rect') else t) for k, t in out]


# ###################################
#  Value noise
# ###################################

def _fade(t):
    """Quintic fade 6t^5 - 15t^4 + 10t^3."""
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(xs, zs, spacing, rng):
    '''Value noise sampled at the lattice coordinates xs (columns) and
    zs (rows), measured from xs[0], zs[0].

    Random values in [-1, 1] sit on a coarse lattice of the given
    spacing and are blended with the quintic fade, so the result stays
    in [-1, 1] and is smooth between coarse nodes.
    '''
    u = (xs - xs[0]) / spacing
    v = (zs - zs[0]) / spacing
    gw = int(np.floor(u[-1])) + 2
    gh = int(np.floor(v[-1])) + 2
    grid = rng.uniform(-1.0, 1.0, size=(gh, gw))

    iu = np.floor(u).astype(int)
    iv = np.floor(v).astype(int)
    fu = _fade(u - iu)
    fv = _fade(v - iv)

    iv_m, iu_m = np.meshgrid(iv, iu, indexing='ij')
    fv_m, fu_m = np.meshgrid(fv, fu, indexing='ij')

    v00 = grid[iv_m, iu_m]
    v01 = grid[iv_m, iu_m + 1]
    v10 = grid[iv_m + 1, iu_m]
    v11 = grid[iv_m + 1, iu_m + 1]

    top = v00 + fu_m * (v01 - v00)
    bot = v10 + fu_m * (v11 - v10)
    return top + fv_m * (bot - top)


def fractal_noise(xs, zs, seed, octaves=4, persistence=0.5, lacunarity=2.0,
                  feature_size=0.25):
    '''Multi-octave value noise normalized to [-1, 1].

    Each octave halves (by `lacunarity`) the lattice spacing and scales
    the amplitude by `persistence`.  The result is divided by the summed
    amplitudes so its range never exceeds [-1, 1].
    '''
    rng = np.random.default_rng(int(seed))
    total = np.zeros((len(zs), len(xs)), dtype=np.float64)
    amp = 1.0
    norm = 0.0
    spacing = float(feature_size)
    for _ in range(int(octaves)):
        total += amp * value_noise(xs, zs, spacing, rng)
        norm += amp
        amp *= persistence
        spacing /= lacunarity
    return total / norm


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


# ###################################
#  HeightField
# ###################################

class HeightField(object):
    '''
         HEIGHTFIELD -- Terrain heights on a uniform X-Z lattice.

         heights[iz, ix] is the height at (x0 + ix*cell_size,
         z0 + iz*cell_size).  Instances are treated as immutable.
    '''
    def __init__(self, heights, cell_size, origin, roughness_scale, seed,
                 flat_rect=FLAT_RECT, rough_rect=ROUGH_RECT, base=0.0,
                 amplitude=None):
        heights = np.asarray(heights, dtype=np.float64)
        if heights.ndim != 2 or min(heights.shape) < 2:
            raise tlTerrainError("Heights must be a 2-D grid of at least 2x2")
        if not np.all(np.isfinite(heights)):
            raise tlTerrainError("Heights must all be finite")
        self.heights = heights
        self.heights.setflags(write=False)
        self.cell_size = float(cell_size)
        self.x0, self.z0 = float(origin[0]), float(origin[1])
        self.roughness_scale = float(roughness_scale)
        self.seed = int(seed)
        self.flat_rect = flat_rect
        self.rough_rect = rough_rect
        self.base = float(base)
        self.amplitude = amplitude

    @property
    def shape(self):
        return self.heights.shape

    @property
    def extent(self):
        ''' (x_min, x_max, z_min, z_max) of the lattice.
        '''
        nz, nx = self.heights.shape
        return (self.x0, self.x0 + (nx - 1) * self.cell_size,
                self.z0, self.z0 + (nz - 1) * self.cell_size)

    def node(self, ix, iz):
        ''' Planar coordinates of lattice node (ix, iz).
        '''
        return (self.x0 + ix * self.cell_size, self.z0 + iz * self.cell_size)

    def contains(self, x, z, margin=0.0):
        ''' True if (x, z) is inside the extent shrunk by `margin`.
        '''
        x_min, x_max, z_min, z_max = self.extent
        return (x_min + margin - EXTENT_TOL <= x <= x_max - margin + EXTENT_TOL and
                z_min + margin - EXTENT_TOL <= z <= z_max - margin + EXTENT_TOL)

    def _locate(self, x, z):
        if not (np.isfinite(x) and np.isfinite(z)) or not self.contains(x, z):
            raise tlExtentError("Point (%.6g, %.6g) is outside the terrain "
                                "extent %s" % (x, z, self.extent))
        nz, nx = self.heights.shape
        u = (x - self.x0) / self.cell_size
        v = (z - self.z0) / self.cell_size

        # Snap to a node when float round-off left us a hair away from it.
        ur, vr = np.rint(u), np.rint(v)
        if abs(u - ur) < 1e-9:
            u = ur
        if abs(v - vr) < 1e-9:
            v = vr
        u = min(max(u, 0.0), nx - 1.0)
        v = min(max(v, 0.0), nz - 1.0)

        ix = min(int(np.floor(u)), nx - 2)
        iz = min(int(np.floor(v)), nz - 2)
        return ix, iz, u - ix, v - iz

    def height_at(self, x, z):
        ''' Bilinear height at (x, z).

        Parameters
        ----------
        x, z : float
            Planar coordinates in meters; must be within the extent.

        Returns
        -------
        height : float
            Interpolated height in meters.  At a lattice node this is the
            stored node height exactly.
        '''
        ix, iz, fx, fz = self._locate(x, z)
        h = self.heights
        a = (1.0 - fx) * h[iz, ix] + fx * h[iz, ix + 1]
        b = (1.0 - fx) * h[iz + 1, ix] + fx * h[iz + 1, ix + 1]
        return float((1.0 - fz) * a + fz * b)

    def slope_at(self, x, z):
        ''' Gradient (dh/dx, dh/dz) of the bilinear interpolant at (x, z).
        '''
        ix, iz, fx, fz = self._locate(x, z)
        h = self.heights
        c = self.cell_size
        h00, h01 = h[iz, ix], h[iz, ix + 1]
        h10, h11 = h[iz + 1, ix], h[iz + 1, ix + 1]
        dx = ((1.0 - fz) * (h01 - h00) + fz * (h11 - h10)) / c
        dz = ((1.0 - fx) * (h10 - h00) + fx * (h11 - h01)) / c
        return (float(dx), float(dz))

    def save(self, path):
        ''' Write the field to a self-describing .npz file.
        '''
        np.savez(path,
                 format_version=np.int64(FORMAT_VERSION),
                 dims=np.array(self.heights.shape, dtype=np.int64),
                 cell_size=np.float64(self.cell_size),
                 origin=np.array([self.x0, self.z0], dtype=np.float64),
                 seed=np.int64(self.seed),
                 roughness_scale=np.float64(self.roughness_scale),
                 amplitude=np.float64(np.nan if self.amplitude is None
                                      else self.amplitude),
                 base=np.float64(self.base),
                 flat_rect=np.array(self.flat_rect[:4], dtype=np.float64),
                 rough_rect=np.array(self.rough_rect[:4], dtype=np.float64),
                 heights=np.ascontiguousarray(self.heights))
        logger.info("Wrote terrain %s to %s" % (self.heights.shape, path))

    @classmethod
    def load(cls, path):
        ''' Read a field written by save().
        '''
        with np.load(path) as npz:
            version = int(npz['format_version'])
            if version != FORMAT_VERSION:
                raise tlTerrainError("Unsupported terrain file version %d in %s"
                                     % (version, path))
            heights = np.array(npz['heights'])
            if tuple(npz['dims']) != heights.shape:
                raise tlTerrainError("Terrain file %s header/body mismatch" % path)
            amp = float(npz['amplitude'])
            return cls(heights, float(npz['cell_size']), tuple(npz['origin']),
                       float(npz['roughness_scale']), int(npz['seed']),
                       flat_rect=AreaRect(*(list(npz['flat_rect']) + [FLAT])),
                       rough_rect=AreaRect(*(list(npz['rough_rect']) + [ROUGH])),
                       base=float(npz['base']),
                       amplitude=None if np.isnan(amp) else amp)

    def __eq__(self, other):
        return (isinstance(other, HeightField) and
                self.heights.shape == other.heights.shape and
                np.array_equal(self.heights, other.heights) and
                self.cell_size == other.cell_size and
                (self.x0, self.z0) == (other.x0, other.z0) and
                self.seed == other.seed)

    def __ne__(self, other):
        return not self.__eq__(other)


# --------------------------------------------------------------------
# GENERATE -- Build the deterministic flat + rough terrain.
#
def generate(flat_rect=FLAT_RECT, rough_rect=ROUGH_RECT, roughness_scale=0.8,
             amplitude=0.05, seed=0, cell_size=0.02, margin=0.5, base=0.0,
             octaves=4, persistence=0.5, lacunarity=2.0, feature_size=0.25,
             blend=0.5, flat_collar=0.1):
    '''Generate a HeightField holding a flat and a rough area.

    Parameters
    ----------
    flat_rect, rough_rect : AreaRect
        Disjoint areas.  The flat rect (plus a `flat_collar` ring) is
        exactly the `base` elevation.

    roughness_scale : float
        Fraction in [0, 1] applied to the noise amplitude, e.g. 0.8 for
        terrain whose unevenness was reduced to 80%.

    amplitude : float
        Peak noise height in meters at roughness_scale=1.  Inside the
        rough rect max|h - base| <= amplitude*roughness_scale.

    seed : int
        Noise seed.  The same seed and parameters give a bit-identical
        grid.

    Returns
    -------
    field : HeightField

    Example
    -------
    .. code-block:: python

        field = heightField.generate(roughness_scale=0.8, amplitude=0.05, seed=7)
        field.height_at(-8.0, 3.0)
    '''
    params = TerrainParams(flat_rect=flat_rect, rough_rect=rough_rect,
                           roughness_scale=roughness_scale, amplitude=amplitude,
                           cell_size=cell_size, margin=margin, base=base,
                           octaves=octaves, persistence=persistence,
                           lacunarity=lacunarity, feature_size=feature_size,
                           blend=blend, flat_collar=flat_collar)
    return generate_from(params, seed)


def generate_from(params, seed):
    '''Generate a HeightField from a validated TerrainParams.'''
    params.validate()
    fr, rr = params.flat_rect, params.rough_rect
    cell = params.cell_size

    x_min = min(fr.x_min, rr.x_min) - params.margin
    x_max = max(fr.x_max, rr.x_max) + params.margin
    z_min = min(fr.z_min, rr.z_min) - params.margin
    z_max = max(fr.z_max, rr.z_max) + params.margin
    nx = int(np.ceil((x_max - x_min) / cell - 1e-9)) + 1
    nz = int(np.ceil((z_max - z_min) / cell - 1e-9)) + 1
    xs = x_min + np.arange(nx) * cell
    zs = z_min + np.arange(nz) * cell

    heights = np.full((nz, nx), params.base, dtype=np.float64)
    peak = params.amplitude * params.roughness_scale
    if peak > 0.0:
        noise = fractal_noise(xs, zs, seed, octaves=params.octaves,
                              persistence=params.persistence,
                              lacunarity=params.lacunarity,
                              feature_size=params.feature_size)

        # Roughness weight: 1 inside the rough rect, fading to 0 over `blend`.
        zz, xx = np.meshgrid(zs, xs, indexing='ij')
        dx = np.maximum(np.maximum(rr.x_min - xx, 0.0), xx - rr.x_max)
        dz = np.maximum(np.maximum(rr.z_min - zz, 0.0), zz - rr.z_max)
        weight = 1.0 - _smoothstep(np.hypot(dx, dz) / params.blend)
        heights = heights + peak * weight * noise

        collar = params.flat_collar
        flat = ((xx >= fr.x_min - collar) & (xx <= fr.x_max + collar) &
                (zz >= fr.z_min - collar) & (zz <= fr.z_max + collar))
        heights[flat] = params.base

    logger.debug("Generated %dx%d terrain, seed=%d, roughness=%.3f" %
                 (nz, nx, seed, params.roughness_scale))
    return HeightField(heights, cell, (x_min, z_min), params.roughness_scale,
                       seed, flat_rect=fr, rough_rect=rr, base=params.base,
                       amplitude=params.amplitude)


# --------------------------------------------------------------------
# Module-level query wrappers.
#
def height_at(field, x, z):
    '''Bilinear terrain height at (x, z); see HeightField.height_at().'''
    return field.height_at(x, z)


def slope_at(field, x, z):
    '''Terrain gradient at (x, z); see HeightField.slope_at().'''
    return field.slope_at(x, z)
