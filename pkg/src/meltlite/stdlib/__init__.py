"""Standard library: builtin catalogue registration and DSL sources.

The manifest creates the root environment (core classes, predefined
discriminants, their stable predefined-array slots) and load_stdlib
expands the shipped ``.melt`` sources on top of it, then attaches the
host-side matcher semantics the verification suites interpret.
"""

from __future__ import annotations

from pathlib import Path

from .. import normcheck as nc
from ..expander import (
    Binding,
    ClassDef,
    FieldDef,
    ModuleEnv,
    PredefValue,
    expand_unit,
)
from ..reader import read_unit

STDLIB_DIR = Path(__file__).parent
STDLIB_SOURCES = ["meltstd.melt"]
STDLIB_MODULE_NAME = "meltstd"

PREDEF_ARRAY_SIZE = 128

# (class name, super name, own field names); order defines field layout
CORE_CLASSES = [
    ("class_root", None, []),
    ("class_named", "class_root", ["named_name"]),
    ("class_discriminant", "class_named", ["disc_methodmap", "disc_parent"]),
    ("class_class", "class_discriminant", ["class_ancestors", "class_fields"]),
    ("class_symbol", "class_named", ["symb_data"]),
    ("class_keyword", "class_symbol", []),
    ("class_sexpr", "class_root", ["sexp_location", "sexp_contents"]),
    ("class_container", "class_root", ["container_value"]),
    ("class_environment", "class_root", ["env_map", "env_parent"]),
    ("class_selector", "class_named", ["sel_formals", "sel_data"]),
]

DISCRIMINANTS = [
    "discr_any_receiver",
    "discr_null_receiver",
    "discr_integer",
    "discr_constant_integer",
    "discr_string",
    "discr_multiple",
    "discr_class_sequence",
    "discr_list",
    "discr_pair",
    "discr_closure",
    "discr_map_objects",
    "discr_map_strings",
    "discr_map_hnodes",
    "discr_mixed_location",
    "discr_decaying",
]

# Stable predefined-array slots; the runtime installs the same values at
# the same indices (slot 0 stays empty).
PREDEF_SLOTS = {}
for _i, (_name, _s, _f) in enumerate(CORE_CLASSES):
    PREDEF_SLOTS[_name] = 1 + _i
for _i, _name in enumerate(DISCRIMINANTS):
    PREDEF_SLOTS[_name] = 1 + len(CORE_CLASSES) + _i


def predef_macro_name(name: str) -> str:
    return "MELTLITE_PREDEF_" + name.upper()


def make_root_env() -> ModuleEnv:
    """The empty root environment plus the runtime-provided catalogue:
    core classes (with their fields) and predefined discriminants."""
    root = ModuleEnv(name="<root>")
    root.predef_map = dict(PREDEF_SLOTS)
    classes = {}
    for name, super_name, fields in CORE_CLASSES:
        cls = ClassDef(name, classes.get(super_name), origin="runtime")
        cls.predef_slot = PREDEF_SLOTS[name]
        base = len(cls.super.all_fields()) if cls.super else 0
        own = []
        for j, fname in enumerate(fields):
            fld = FieldDef(fname, cls, base + j)
            root.field_registry[fname] = fld
            root.bindings[fname] = Binding(fname, "field", fld)
            own.append(fld)
        cls.own_fields = own
        classes[name] = cls
        root.bindings[name] = Binding(name, "class", cls)
    for name in DISCRIMINANTS:
        pv = PredefValue(name, PREDEF_SLOTS[name])
        root.bindings[name] = Binding(name, "instance", pv)
    return root


# --- host-side matcher semantics over normcheck descriptions ---


def _as_text(x):
    if isinstance(x, nc.SStr):
        return x.text
    return x


def _sem_cstring_same(subj, ins):
    s = _as_text(subj)
    c = _as_text(ins[0])
    return s is not None and c is not None and s == c


def _kindtest(klass):
    return lambda subj, ins: isinstance(subj, klass)


_C_MATCHER_SEMS = {
    "cstring_same": (_sem_cstring_same, lambda s, i: ()),
    "assign_single": (
        _kindtest(nc.HAssign),
        lambda s, i: (s.lhs, s.rhs),
    ),
    "node_var_decl": (
        _kindtest(nc.HVarDecl),
        lambda s, i: (
            s.type_node,
            s.name_node.ctext if s.name_node is not None else None,
            s.name_node,
        ),
    ),
    "node_record_type_with_fields": (
        _kindtest(nc.HRecordType),
        lambda s, i: (s.name_node, s.first_field),
    ),
    "node_field_decl": (
        _kindtest(nc.HFieldDecl),
        lambda s, i: (s.name_node, s.type_node),
    ),
    "node_identifier": (
        _kindtest(nc.HIdentifier),
        lambda s, i: (s.ctext,),
    ),
    "node_array_type": (
        _kindtest(nc.HArrayType),
        lambda s, i: (s.elem, s.index_type),
    ),
    "node_integer_type_bounded": (
        _kindtest(nc.HIntegerType),
        lambda s, i: (s, s.min_cst, s.max_cst, s.size_cst),
    ),
    "node_integer_cst": (
        _kindtest(nc.HIntegerCst),
        lambda s, i: (s.value,),
    ),
    "node_array_ref": (
        _kindtest(nc.HArrayRef),
        lambda s, i: (s.base, s.index),
    ),
    "node_component_ref": (
        _kindtest(nc.HComponentRef),
        lambda s, i: (s.base, s.fld),
    ),
    "integerbox_of": (
        _kindtest(nc.DBoxLong),
        lambda s, i: (s.num,),
    ),
}


def _sem_isbiggereven(subj, ins):
    # matches an even long strictly greater than the bound; the halved
    # subject feeds the sub-pattern
    if not isinstance(subj, int) or isinstance(subj, bool):
        return None
    bound = ins[0]
    if subj % 2 == 0 and subj > bound:
        return (subj // 2,)
    return None


_FUN_MATCHER_SEMS = {
    "isbiggereven": _sem_isbiggereven,
}


def attach_matcher_semantics(env: ModuleEnv):
    e = env
    while e is not None:
        for b in e.bindings.values():
            if b.kind == "c-matcher" and b.name in _C_MATCHER_SEMS:
                b.payload.sem_test, b.payload.sem_fill = _C_MATCHER_SEMS[b.name]
            elif b.kind == "fun-matcher" and b.name in _FUN_MATCHER_SEMS:
                b.payload.sem = _FUN_MATCHER_SEMS[b.name]
        e = e.parent


def stdlib_sources():
    return [STDLIB_DIR / name for name in STDLIB_SOURCES]


def expand_stdlib(root: ModuleEnv = None):
    """Expand the stdlib sources; returns (module, export view env)."""
    if root is None:
        root = make_root_env()
    sexprs = []
    for path in stdlib_sources():
        sexprs.extend(read_unit(path.read_text(), path.name))
    module = expand_unit(sexprs, root, module_name=STDLIB_MODULE_NAME)
    attach_matcher_semantics(module.env)
    return module, module.export_env


def load_stdlib(root: ModuleEnv = None) -> ModuleEnv:
    """Environment binding the full catalogue, for expanding user code."""
    _module, env = expand_stdlib(root)
    return env
