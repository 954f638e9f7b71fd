"""JSON wire formats for spaces, actions and couplings.

Space:    {"labels": [...], "dist": [[...]], "mass": [...]}
Action:   {"space": <space object or file path>, "generators": [[...], ...]}
Coupling: {"plan": [[...]], "muX": [...], "muY": [...]}

All reals are decimal, matrices row-major.  Loading validates.
"""

from __future__ import annotations

import json
import os

from .coupling import Coupling, validate_coupling
from .errors import ValidationError
from .group import MMAction, trivial_action, validate_action
from .mmspace import FiniteMMSpace, validate_space


def space_from_dict(d: dict) -> FiniteMMSpace:
    try:
        return validate_space(d["labels"], d["dist"], d["mass"])
    except KeyError as exc:
        raise ValidationError(f"space JSON is missing key {exc}") from exc


def space_to_dict(space: FiniteMMSpace) -> dict:
    return {
        "labels": list(space.labels),
        "dist": space.dist.tolist(),
        "mass": space.mass.tolist(),
    }


def action_from_dict(d: dict, *, base_dir: str = ".") -> MMAction:
    try:
        raw_space = d["space"]
        generators = d["generators"]
    except KeyError as exc:
        raise ValidationError(f"action JSON is missing key {exc}") from exc
    if isinstance(raw_space, str):
        space = load_space(os.path.join(base_dir, raw_space))
    else:
        space = space_from_dict(raw_space)
    return validate_action(space, generators)


def action_to_dict(action: MMAction) -> dict:
    return {
        "space": space_to_dict(action.space),
        "generators": [list(p) for p in action.elements],
    }


def coupling_from_dict(d: dict) -> Coupling:
    try:
        return validate_coupling(d["plan"], d["muX"], d["muY"])
    except KeyError as exc:
        raise ValidationError(f"coupling JSON is missing key {exc}") from exc


def coupling_to_dict(pi: Coupling) -> dict:
    return {
        "plan": pi.plan.tolist(),
        "muX": pi.muX.tolist(),
        "muY": pi.muY.tolist(),
    }


def load_space(path: str) -> FiniteMMSpace:
    with open(path) as fh:
        return space_from_dict(json.load(fh))


def load_instance(path: str, *, use_group: bool) -> MMAction:
    """Load a space or action file; without use_group the group is trivial."""
    with open(path) as fh:
        doc = json.load(fh)
    if "generators" in doc:
        action = action_from_dict(doc, base_dir=os.path.dirname(path) or ".")
        return action if use_group else trivial_action(action.space)
    return trivial_action(space_from_dict(doc))
