"""Lebedev sphere sampling, 2702-node rule.

Nodes are generated from the classic octahedral-symmetry orbit tables
(Lebedev & Laikov). An orbit is a base triple expanded over all distinct
coordinate permutations and sign flips:

==== ===================== ======
code base triple            points
==== ===================== ======
0    (1, 0, 0)              6
1    (a, a, 0), a=sqrt(1/2) 12
2    (a, a, a), a=sqrt(1/3) 8
3    (a, a, b), b=sqrt(1-2a^2) 24
4    (a, b, 0), b=sqrt(1-a^2)  24
5    (a, b, c), c=sqrt(1-a^2-b^2) 48
==== ===================== ======

Only the 2702-node rule is carried: it is the only full-sphere sampling the
toolkit ships (rings and file grids cover other needs). Quadrature weights
are dropped; only directions are used here.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .core import DirectionGrid

# (code, a, b) orbit parameters of the 2702-node rule.
_RULE_2702 = (
    (0, 0.0, 0.0),
    (2, 0.0, 0.0),
    (3, 0.02065562538818703, 0.0),
    (3, 0.05250918173022379, 0.0),
    (3, 0.08993480082038376, 0.0),
    (3, 0.1306023924436019, 0.0),
    (3, 0.1732060388531418, 0.0),
    (3, 0.2168727084820249, 0.0),
    (3, 0.2609528309173586, 0.0),
    (3, 0.3049252927938952, 0.0),
    (3, 0.3483484138084404, 0.0),
    (3, 0.3908321549106406, 0.0),
    (3, 0.4320210071894814, 0.0),
    (3, 0.4715824795890053, 0.0),
    (3, 0.5091984794078454, 0.0),
    (3, 0.5445580145650804, 0.0),
    (3, 0.6072575796841768, 0.0),
    (3, 0.6339484505755802, 0.0),
    (3, 0.6570718257486958, 0.0),
    (3, 0.6762557330090709, 0.0),
    (3, 0.691116169692379, 0.0),
    (3, 0.701284191165996, 0.0),
    (3, 0.706455927241002, 0.0),
    (4, 0.06123554989894765, 0.0),
    (4, 0.1533070348312393, 0.0),
    (4, 0.2563902605244206, 0.0),
    (4, 0.3629346991663361, 0.0),
    (4, 0.4683949968987538, 0.0),
    (4, 0.5694479240657953, 0.0),
    (4, 0.6634465430993955, 0.0),
    (5, 0.1033958573552305, 0.03034544009063584),
    (5, 0.1473521412414395, 0.06618803044247135),
    (5, 0.1924552158705967, 0.1054431128987715),
    (5, 0.2381094362890328, 0.1468263551238858),
    (5, 0.283812170793676, 0.1894486108187886),
    (5, 0.3291323133373415, 0.2326374238761579),
    (5, 0.373689697874146, 0.2758485808485768),
    (5, 0.4171406040760013, 0.3186179331996921),
    (5, 0.4591677985256915, 0.3605329796303794),
    (5, 0.4994733831718418, 0.4012147253586509),
    (5, 0.5377731830445096, 0.4403050025570692),
    (5, 0.5737917830001331, 0.4774565904277483),
    (5, 0.2027323586271389, 0.03544122504976147),
    (5, 0.2516942375187273, 0.07418304388646328),
    (5, 0.3000227995257181, 0.1150502745727186),
    (5, 0.3474806691046342, 0.1571963371209364),
    (5, 0.3938103180359209, 0.19996318772471),
    (5, 0.4387519590455703, 0.2428073457846535),
    (5, 0.4820503960077787, 0.2852575132906155),
    (5, 0.5234573778475101, 0.3268884208674639),
    (5, 0.5627318647235282, 0.3673033321675939),
    (5, 0.5996390607156954, 0.406121155183029),
    (5, 0.3084780753791947, 0.03860125523100059),
    (5, 0.3589988275920223, 0.07928938987104867),
    (5, 0.4078628415881973, 0.1212614643030087),
    (5, 0.4549287258889735, 0.1638770827382693),
    (5, 0.5000278512957279, 0.2065965798260176),
    (5, 0.5429785044928199, 0.2489436378852235),
    (5, 0.5835939850491711, 0.2904811368946891),
    (5, 0.6216870353444856, 0.3307941957666609),
    (5, 0.4151104662709091, 0.04064829146052554),
    (5, 0.4649804275009218, 0.08258424547294756),
    (5, 0.5124695757009662, 0.1251841962027289),
    (5, 0.5574711100606224, 0.1679107505976331),
    (5, 0.5998597333287227, 0.2102805057358715),
    (5, 0.63950071485166, 0.2518418087774107),
    (5, 0.5188456224746252, 0.04194321676077518),
    (5, 0.5664190707942778, 0.08457661551921498),
    (5, 0.6110464353283153, 0.1273652932519396),
    (5, 0.6526430302051563, 0.1698173239076354),
    (5, 0.6167551880377548, 0.04266398851548864),
    (5, 0.6607195418355383, 0.0855192581423835),
)


def _orbit(code: int, a: float, b: float) -> list[tuple[float, float, float]]:
    if code == 0:
        base = (1.0, 0.0, 0.0)
    elif code == 1:
        base = (math.sqrt(0.5), math.sqrt(0.5), 0.0)
    elif code == 2:
        r = math.sqrt(1.0 / 3.0)
        base = (r, r, r)
    elif code == 3:
        base = (a, a, math.sqrt(max(1.0 - 2.0 * a * a, 0.0)))
    elif code == 4:
        base = (a, math.sqrt(max(1.0 - a * a, 0.0)), 0.0)
    elif code == 5:
        base = (a, b, math.sqrt(max(1.0 - a * a - b * b, 0.0)))
    else:
        raise ValueError(f"unknown orbit code {code}")
    points = set()
    for perm in itertools.permutations(base):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            p = tuple(s * x for s, x in zip(signs, perm))
            # collapse -0.0 so sign flips of zero coordinates do not
            # produce near-duplicate tuples
            points.add(tuple(x + 0.0 for x in p))
    return sorted(points)


def lebedev_2702() -> DirectionGrid:
    """The 2702-direction Lebedev grid as a :class:`DirectionGrid`."""
    xyz = np.array(
        [p for code, a, b in _RULE_2702 for p in _orbit(code, a, b)],
        dtype=np.float64,
    )
    thetas = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
    phis = np.arctan2(xyz[:, 1], xyz[:, 0]) % (2.0 * math.pi)
    return DirectionGrid(thetas, phis, name="lebedev-2702")
