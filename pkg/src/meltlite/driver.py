"""Command line driver: translate, run, doc and match-dump modes.

Exit codes: 0 ok, 1 translation error, 2 build error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import shlex
import subprocess
import sys
import tempfile
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .cgen import EmitCtx, compile_all_matches, emit_module, mangle
from .errors import MeltError
from .expander import (
    CIterDef,
    ClassDef,
    CMatcherDef,
    Definition,
    FunctionDef,
    FunMatcherDef,
    InstanceDef,
    ModuleEnv,
    PrimitiveDef,
    SelectorDef,
    expand_unit,
)
from .matchc import emit_dot
from .normalizer import normalize_module
from .reader import MsRef, MsText, read_unit
from .stdlib import STDLIB_MODULE_NAME, expand_stdlib, make_root_env, stdlib_sources

DEFAULT_CC = (
    "cc -O1 -fPIC -shared {in} -o {out} -I{inc} -L{lib}"
    " -lmeltlite_rt -lmeltlite_hostir -Wl,-rpath,{lib}"
)


@dataclass
class Config:
    work_dir: Path = Path(".")
    compiler_command: str = DEFAULT_CC
    host_version: str = "4.6"
    debug: bool = False
    line_directives: bool = True
    split_threshold: int = 64
    dump_match: bool = False
    runtime_dir: Path = None
    modes: list = field(default_factory=list)


def fail(message, code=1):
    print(f"meltlite: error: {message}", file=sys.stderr)
    return code


def module_name_for(path: Path) -> str:
    return path.stem


def emit_ctx_for(name, cfg, env) -> EmitCtx:
    return EmitCtx(
        module_name=name,
        line_directives=cfg.line_directives,
        split_threshold=cfg.split_threshold,
        host_version=cfg.host_version,
        predefined_map=env.root().predef_map,
    )


def translate_source(text, origin, parent_env, name, cfg):
    """Full pipeline for one unit; returns (module, units, graphs)."""
    sexprs = read_unit(text, origin)
    module = expand_unit(sexprs, parent_env, module_name=name, host_version=cfg.host_version)
    normalize_module(module, host_version=cfg.host_version)
    graphs = compile_all_matches(module, module.env)
    units = emit_module(module, emit_ctx_for(name, cfg, parent_env))
    return module, units, graphs


def write_atomic(path: Path, text: str):
    """No partial units on error: write aside, rename into place."""
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text)
    tmp.replace(path)


def _load_stdlib_env():
    root = make_root_env()
    module, env = expand_stdlib(root)
    return module, env


def cmd_translate(inputs, cfg: Config):
    """Translate each input; later files see earlier files' exports."""
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    _stdmod, env = _load_stdlib_env()
    written = []
    for path in inputs:
        path = Path(path)
        name = module_name_for(path)
        module, units, graphs = translate_source(
            path.read_text(), str(path), env, name, cfg
        )
        for fname, text in units:
            out = cfg.work_dir / fname
            write_atomic(out, text)
            written.append(out)
        if cfg.dump_match:
            for k, g in enumerate(graphs):
                out = cfg.work_dir / f"{name}_match{k}.dot"
                write_atomic(out, emit_dot(g, f"match{k}"))
                written.append(out)
        env = module.export_env
    return written


# --- run mode ---


def runtime_layout(cfg: Config):
    rdir = cfg.runtime_dir
    if rdir is None:
        envdir = os.environ.get("MELTLITE_RUNTIME_DIR")
        rdir = Path(envdir) if envdir else Path("runtime")
    rdir = Path(rdir)
    inc = rdir / "include"
    lib = rdir / "build"
    return inc, lib


def build_module(unit_paths, out_so: Path, cfg: Config):
    inc, lib = runtime_layout(cfg)
    command = os.environ.get("MELTLITE_CC", cfg.compiler_command)
    text = command.format(
        **{"in": " ".join(str(p) for p in unit_paths), "out": str(out_so),
           "inc": str(inc), "lib": str(lib)}
    )
    proc = subprocess.run(shlex.split(text), capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise OSError(f"compiler failed ({proc.returncode}): {text}")
    return out_so


def translate_and_build(text, origin, env, name, cfg, rundir):
    module, units, _ = translate_source(text, origin, env, name, cfg)
    paths = []
    for fname, body in units:
        p = rundir / fname
        write_atomic(p, body)
        paths.append(p)
    so = rundir / f"{name}.so"
    build_module(paths, so, cfg)
    return module, so


def cmd_run(input_path, mode, hir_files, cfg: Config):
    import ctypes

    input_path = Path(input_path)
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    rundir = Path(tempfile.mkdtemp(prefix=f"run-{uuid.uuid4().hex[:8]}-", dir=cfg.work_dir))

    stdmod, env = _load_stdlib_env()
    name = module_name_for(input_path)
    try:
        stdtext = "\n".join(p.read_text() for p in stdlib_sources())
        _m, std_so = translate_and_build(
            stdtext, stdlib_sources()[0].name, make_root_env(), STDLIB_MODULE_NAME, cfg, rundir
        )
        usermod, user_so = translate_and_build(
            input_path.read_text(), str(input_path), env, name, cfg, rundir
        )
    except MeltError as err:
        return fail(str(err), 1)
    except OSError as err:
        return fail(str(err), 2)

    inc, lib = runtime_layout(cfg)
    try:
        rt = ctypes.CDLL(str(Path(lib) / "libmeltlite_rt.so"), mode=ctypes.RTLD_GLOBAL)
        hostir = ctypes.CDLL(
            str(Path(lib) / "libmeltlite_hostir.so"), mode=ctypes.RTLD_GLOBAL
        )
    except OSError as err:
        return fail(f"cannot load the runtime libraries: {err}", 2)
    rt.meltlite_init.restype = ctypes.c_void_p
    ctx = rt.meltlite_init()
    if cfg.debug:
        rt.meltlite_set_debug(1)

    def start_of(dll, modname):
        fn = getattr(dll, f"meltlite_start_{mangle(modname)}")
        fn.restype = ctypes.c_void_p
        fn.argtypes = [ctypes.c_void_p, ctypes.c_void_p]
        return fn

    try:
        std_dll = ctypes.CDLL(str(std_so), mode=ctypes.RTLD_GLOBAL)
        user_dll = ctypes.CDLL(str(user_so), mode=ctypes.RTLD_GLOBAL)
    except OSError as err:
        return fail(f"cannot load the built modules: {err}", 2)
    stdenv_v = start_of(std_dll, STDLIB_MODULE_NAME)(ctx, None)
    start_of(user_dll, name)(ctx, stdenv_v)

    status = 0
    if mode and mode != "none":
        hostir.hi_find_pass.restype = ctypes.c_int
        hostir.hi_find_pass.argtypes = [ctypes.c_char_p]
        if hostir.hi_find_pass(mode.encode()) < 0:
            hostir.hi_pass_count.restype = ctypes.c_int
            hostir.hi_pass_name.restype = ctypes.c_char_p
            hostir.hi_pass_name.argtypes = [ctypes.c_int]
            known = [
                hostir.hi_pass_name(i).decode()
                for i in range(hostir.hi_pass_count())
            ]
            return fail(
                f"unknown mode {mode}; registered modes: {', '.join(known) or '(none)'}",
                3,
            )
        hostir.hi_parse_file.restype = ctypes.c_void_p
        hostir.hi_parse_file.argtypes = [ctypes.c_char_p, ctypes.c_char_p, ctypes.c_size_t]
        hostir.hi_run_passes.restype = ctypes.c_int
        hostir.hi_run_passes.argtypes = [ctypes.c_void_p]
        for hir in hir_files:
            errbuf = ctypes.create_string_buffer(256)
            fn = hostir.hi_parse_file(str(hir).encode(), errbuf, 256)
            if not fn:
                return fail(f"{hir}: {errbuf.value.decode()}", 3)
            hostir.hi_run_passes(fn)
    rt.meltlite_finish(ctypes.c_void_p(ctx))
    return status


# --- doc mode ---


def render_doc_chunks(chunks) -> str:
    out = []
    for ch in chunks:
        if isinstance(ch, MsText):
            out.append(ch.text)
        else:
            out.append(f"@var{{{ch.name}}}")
    return "".join(out).strip()


def _formals_text(formals) -> str:
    parts = []
    cur = None
    for f in formals:
        if f.ctype is not cur:
            parts.append(f":{f.ctype.name}")
            cur = f.ctype
        parts.append(f.name)
    return "(" + " ".join(parts) + ")"


def doc_entry(item: Definition) -> str:
    p = item.payload
    kind = item.kind.replace("def", "", 1)
    if isinstance(p, FunctionDef):
        sig = _formals_text(p.formals)
    elif isinstance(p, PrimitiveDef):
        sig = f"{_formals_text(p.formals)} -> :{p.result.name}"
    elif isinstance(p, CIterDef):
        sig = f"{_formals_text(p.start_formals)} {p.state} {_formals_text(p.local_formals)}"
    elif isinstance(p, CMatcherDef):
        ins = [p.match_formal] + p.in_formals
        sig = f"{_formals_text(ins)} -> {_formals_text(p.out_formals)}"
    elif isinstance(p, FunMatcherDef):
        sig = f"{_formals_text(p.in_formals)} -> {_formals_text(p.out_formals)}"
    elif isinstance(p, ClassDef):
        fields = " ".join(f.name for f in p.own_fields)
        sup = p.super.name if p.super else "none"
        sig = f":super {sup} :fields ({fields})"
    elif isinstance(p, InstanceDef):
        sig = f"instance of {p.cls.name}"
    elif isinstance(p, SelectorDef):
        sig = "selector"
    else:
        sig = ""
    lines = [f"@deffn {{{kind}}} {item.name} {sig}".rstrip()]
    doc = getattr(p, "doc", None)
    if doc:
        lines.append(render_doc_chunks(doc))
    lines.append("@end deffn")
    return "\n".join(lines)


def cmd_doc(inputs, cfg: Config, out_path=None):
    _stdmod, env = _load_stdlib_env()
    entries = []
    for path in inputs:
        path = Path(path)
        name = module_name_for(path)
        sexprs = read_unit(path.read_text(), str(path))
        module = expand_unit(sexprs, env, module_name=name, host_version=cfg.host_version)
        entries.append(f"@c module {name}")
        for item in module.items:
            if isinstance(item, Definition):
                entries.append(doc_entry(item))
        env = module.export_env
    text = "\n\n".join(entries) + "\n"
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    out = Path(out_path) if out_path else cfg.work_dir / "meltlite-doc.texi"
    write_atomic(out, text)
    return out


# --- argument handling ---


def build_parser():
    ap = argparse.ArgumentParser(
        prog="meltlite", description="translate a Lisp-like DSL to C over a managed runtime"
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--work-dir", default=os.environ.get("MELTLITE_WORKDIR", "."))
        p.add_argument("--host-version", default="4.6")
        p.add_argument("--split", type=int, default=64, metavar="N")
        p.add_argument("--no-line-directives", action="store_true")
        p.add_argument("--dump-match", action="store_true")
        p.add_argument("--runtime-dir", default=None)
        p.add_argument("--debug", action="store_true")

    t = sub.add_parser("translate", help="translate .melt files to C units")
    t.add_argument("files", nargs="+")
    common(t)

    r = sub.add_parser("run", help="translate, build and run one module")
    r.add_argument("file")
    r.add_argument("--mode", default="none")
    r.add_argument("--hir", action="append", default=[], metavar="FILE")
    common(r)

    d = sub.add_parser("doc", help="extract definition documentation")
    d.add_argument("files", nargs="+")
    d.add_argument("-o", "--output", default=None)
    common(d)
    return ap


def config_from(args) -> Config:
    return Config(
        work_dir=Path(args.work_dir),
        host_version=args.host_version,
        debug=args.debug,
        line_directives=not args.no_line_directives,
        split_threshold=args.split,
        dump_match=args.dump_match,
        runtime_dir=Path(args.runtime_dir) if args.runtime_dir else None,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from(args)
    try:
        if args.command == "translate":
            written = cmd_translate(args.files, cfg)
            for p in written:
                print(p)
            return 0
        if args.command == "run":
            return cmd_run(args.file, args.mode, args.hir, cfg)
        if args.command == "doc":
            print(cmd_doc(args.files, cfg, args.output))
            return 0
    except MeltError as err:
        return fail(str(err), 1)
    except OSError as err:
        return fail(str(err), 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
