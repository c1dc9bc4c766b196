"""Built-in facilities: a full-size two-room test facility and a small-scale model."""
from __future__ import annotations

import copy

from .config import ScenarioConfig, config_from_dict

LARGE_SOURCE_ROOM = [5.0, 4.0, 3.0]
LARGE_RECEIVING_ROOM = [4.5, 4.0, 3.0]
LARGE_SOURCES = [
    [1.2, 1.0, 1.7], [0.8, 3.0, 1.2], [1.3, 2.1, 2.3], [1.5, 1.8, 0.9],
    [2.0, 2.5, 1.4], [2.2, 1.2, 2.0], [2.6, 2.7, 2.1], [2.8, 1.6, 1.8],
    [2.9, 0.8, 1.3], [3.2, 2.4, 1.1], [3.9, 1.5, 1.9], [4.0, 3.1, 0.8],
]
LARGE_MICS_SR = [
    [0.7, 1.6, 1.4], [1.2, 2.5, 1.6], [2.0, 1.0, 1.0], [1.9, 3.0, 2.0],
    [2.6, 2.2, 0.9], [3.4, 0.8, 2.3], [4.0, 1.7, 0.7], [3.5, 3.3, 1.6],
]
# x relative to the receiving room's start (l_SR + l_G)
LARGE_MICS_RR = [
    [1.2, 1.3, 0.8], [1.4, 3.0, 1.6], [1.6, 2.3, 1.1], [1.9, 1.7, 2.1],
    [2.6, 2.6, 1.4], [2.7, 1.4, 1.7], [3.6, 1.0, 2.2], [3.3, 3.0, 1.0],
]
LARGE_INTERVALS = [[1, 300], [300, 500], [500, 650], [650, 715]]
LARGE_LENGTHS = [
    {"structure": 0.09, "fluid": 0.19, "porous": 0.03},
    {"structure": 0.07, "fluid": 0.11, "porous": 0.02},
    {"structure": 0.06, "fluid": 0.09, "porous": 0.02},
    {"structure": 0.057, "fluid": 0.08, "porous": 0.019},
]

SMALL_SOURCE_ROOM = [0.56, 1.05, 0.72]
SMALL_SOURCES = [[0.1, 0.3, 0.1], [0.3, 0.8, 0.4]]
SMALL_MICS_SR = [[0.1, 0.4, 0.7], [0.2, 0.8, 0.2]]
SMALL_MICS_RR = [[0.9, 0.6, 0.6], [0.6, 0.2, 0.4]]  # absolute coordinates

REVERB = {"kind": "reverberation", "T": 1.5}
ATMOS = {"kind": "atmospheric"}


def _large(name: str, leaves, gap_domain) -> dict:
    d = {
        "name": name,
        "rooms": {"source": LARGE_SOURCE_ROOM, "receiving": LARGE_RECEIVING_ROOM},
        "walls": {"material": "plasterboard", "leaves": leaves, "sizing_thickness": 0.025},
        "domains": {
            "source": {"material": "air", "damping": REVERB},
            "receiving": {"material": "air", "damping": REVERB},
        },
        "sources": {"positions": LARGE_SOURCES, "Q_s": 1e-4},
        "microphones": {"source": LARGE_MICS_SR, "receiving": LARGE_MICS_RR, "receiving_relative": True},
        "frequency": {
            "intervals": LARGE_INTERVALS,
            "df": 1.0,
            "nodes_per_wavelength": 13,
            "element_lengths": LARGE_LENGTHS,
            "round_digits": 2,
            "mesh": "domain",
        },
        "bands": {"f_min": 8, "f_max": 630},
        "correction": False,
        "output": {"dir": f"out/{name}"},
    }
    if gap_domain is not None:
        d["gap"] = {"l_x": 0.05}
        d["domains"]["gap"] = gap_domain
    return d


def _small(name: str, leaves, rr_lx, domains, nodes) -> dict:
    d = {
        "name": name,
        "rooms": {"source": SMALL_SOURCE_ROOM, "receiving": [rr_lx, 1.05, 0.72]},
        "walls": {"material": "plasterboard", "leaves": leaves},
        "domains": domains,
        "sources": {"positions": SMALL_SOURCES, "Q_s": 1e-4},
        "microphones": {"source": SMALL_MICS_SR, "receiving": SMALL_MICS_RR, "receiving_relative": False},
        "frequency": {
            "intervals": [[1, 1000]],
            "df": 1.0,
            "nodes_per_wavelength": nodes,
            "round_digits": 2,
            "mesh": "conforming",
        },
        "bands": {"f_min": 8, "f_max": 800},
        "correction": False,
        "output": {"dir": f"out/{name}"},
    }
    if len(leaves) == 2:
        d["gap"] = {"l_x": 0.01}
    return d


PRESETS = {
    "large-slw": _large("large-slw", [0.05], None),
    "large-dlwni": _large("large-dlwni", [0.025, 0.025], {"material": "air", "damping": ATMOS}),
    "large-dlwi": _large("large-dlwi", [0.025, 0.025], {"material": "glass_wool"}),
    "small-slw1": _small(
        "small-slw1", [0.025], 0.63,
        {"source": {"material": "air", "damping": ATMOS}, "receiving": {"material": "air", "damping": ATMOS}}, 12,
    ),
    "small-slw2": _small(
        "small-slw2", [0.025], 0.63,
        {"source": {"material": "air", "damping": REVERB}, "receiving": {"material": "air", "damping": REVERB}}, 12,
    ),
    "small-dlwni": _small(
        "small-dlwni", [0.025, 0.025], 0.62,
        {
            "source": {"material": "air", "damping": REVERB},
            "gap": {"material": "air", "damping": ATMOS},
            "receiving": {"material": "air", "damping": REVERB},
        },
        12,
    ),
    "small-dlwi": _small(
        "small-dlwi", [0.025, 0.025], 0.62,
        {
            "source": {"material": "air", "damping": REVERB},
            "gap": {"material": "glass_wool"},
            "receiving": {"material": "air", "damping": REVERB},
        },
        7,
    ),
}

DESCRIPTIONS = {
    "large-slw": "full-size facility, single plasterboard leaf h=0.05 m",
    "large-dlwni": "full-size facility, double leaf 2x0.025 m, 0.05 m air gap",
    "large-dlwi": "full-size facility, double leaf 2x0.025 m, 0.05 m glass-wool gap",
    "small-slw1": "small-scale model, single leaf, atmospheric air damping",
    "small-slw2": "small-scale model, single leaf, reverberation-time air damping",
    "small-dlwni": "small-scale model, double leaf, 0.01 m air gap",
    "small-dlwi": "small-scale model, double leaf, 0.01 m glass-wool gap",
}


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def load_preset(name: str) -> ScenarioConfig:
    return config_from_dict(preset_dict(name))
