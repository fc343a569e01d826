"""Dependency lint: the oracles must not reuse the code they check."""

import ast
import inspect

from hoipoint import testkit

ORACLES = ("oracle_group_rows", "oracle_group", "oracle_ap")
# non-scalar helpers from the modules under test
FORBIDDEN = {
    "iou",
    "iou_matrix",
    "overlaps",
    "boxes_overlap",
    "interaction_box",
    "reference_box",
    "corner_distances",
    "corner_distance",
    "midpoint",
    "check_conditions",
    "angle_filter",
    "dist_ratio_filter",
    "group",
    "group_rows",
    "match_triplets",
    "average_precision",
    "evaluate",
    "prediction_order",
    "interaction_point",
    "interaction_vector",
    "center",
}


def _names_used(fn_name, seen=None):
    """Names referenced by ``fn_name`` and by every testkit helper it calls."""
    seen = set() if seen is None else seen
    if fn_name in seen:
        return set()
    seen.add(fn_name)
    tree = ast.parse(inspect.getsource(getattr(testkit, fn_name)))
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.Attribute):
            names.add(node.attr)
    for n in list(names):
        obj = getattr(testkit, n, None)
        if inspect.isfunction(obj) and obj.__module__ == testkit.__name__:
            names |= _names_used(n, seen)
    return names


def test_testkit_imports_no_geometry_helpers():
    tree = ast.parse(inspect.getsource(testkit))
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            imported |= {a.asname or a.name for a in node.names}
    assert not imported & FORBIDDEN


def test_oracles_use_only_scalar_code():
    for name in ORACLES:
        leaked = _names_used(name) & FORBIDDEN
        assert not leaked, f"{name} uses {sorted(leaked)}"
