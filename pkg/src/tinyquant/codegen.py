"""C emission for fixed-point programs, plus memory-map reports.

Weights become ``const`` integer arrays. Every RAM tensor (the input and
all intermediates) lives in one static byte array ``scratch`` at the offset
chosen by the memory planner and is accessed through ``memcpy`` loads and
stores, so unaligned offsets are safe. Arithmetic mirrors
``interp.integer_op`` exactly: int64 accumulation, one arithmetic shift to
the destination scale, saturation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .interp import smul_format
from .ir import Program
from .memplan import LiveRange, MemoryMap
from .numrep import FixedFormat, RepParams

C_TYPES = {8: "int8_t", 16: "int16_t", 32: "int32_t"}


class CodegenError(ValueError):
    pass


@dataclass
class EmittedProgram:
    source: str
    scratch_size: int
    offsets: dict[str, int]
    formats: dict[str, tuple[int, int]]  # tensor -> (bits, scale)
    input_size: int
    output_size: int


class _Emitter:
    def __init__(self, program: Program, formats: Mapping[str, FixedFormat], mm: MemoryMap):
        self.p = program
        self.fmt = formats
        self.mm = mm
        self.ram = set(program.ram_tensors)
        self.lines: list[str] = []

    def ref(self, t: str, idx: str) -> str:
        if t in self.ram:
            f = self.fmt[t]
            return f"ld{f.b}({self.mm.offsets[t]}u + ({idx}) * {f.b // 8}u)"
        return f"W_{t}[{idx}]"

    def store(self, t: str, idx: str, val: str) -> str:
        f = self.fmt[t]
        return f"st{f.b}({self.mm.offsets[t]}u + ({idx}) * {f.b // 8}u, sat({val}, {f.qmin}LL, {f.qmax}LL));"

    def emit(self, line: str = "", depth: int = 0) -> None:
        self.lines.append("    " * depth + line if line else "")

    def binding(self, b) -> None:
        p, fmt = self.p, self.fmt
        d = fmt[b.name]
        n = p.cardinality(b.name)
        src = [fmt[s] for s in b.srcs]
        self.emit(f"/* {b.name} = {b.op}({', '.join(b.srcs)}) */", 1)
        if b.op == "matmul":
            rows, inner = p.shapes[b.srcs[0]]
            cols = p.shapes[b.srcs[1]][1]
            sh = src[0].s + src[1].s - d.s
            self.emit(f"for (int i = 0; i < {rows}; i++) {{", 1)
            self.emit(f"for (int j = 0; j < {cols}; j++) {{", 2)
            self.emit("int64_t acc = 0;", 3)
            self.emit(f"for (int k = 0; k < {inner}; k++)", 3)
            a = self.ref(b.srcs[0], f"i * {inner} + k")
            c = self.ref(b.srcs[1], f"k * {cols} + j")
            self.emit(f"acc += (int64_t){a} * (int64_t){c};", 4)
            self.emit(self.store(b.name, f"i * {cols} + j", f"shr(acc, {sh})"), 3)
            self.emit("}", 2)
            self.emit("}", 1)
            return
        if b.op == "argmax":
            m = p.cardinality(b.srcs[0])
            self.emit("{", 1)
            self.emit(f"int64_t best = {self.ref(b.srcs[0], '0')}, arg = 0;", 2)
            self.emit(f"for (int i = 1; i < {m}; i++) {{", 2)
            self.emit(f"int64_t v = {self.ref(b.srcs[0], 'i')};", 3)
            self.emit("if (v > best) { best = v; arg = i; }", 3)
            self.emit("}", 2)
            self.emit(self.store(b.name, "0", "arg"), 2)
            self.emit("}", 1)
            return
        self.emit(f"for (int i = 0; i < {n}; i++) {{", 1)
        if b.op == "hadamard":
            sh = src[0].s + src[1].s - d.s
            val = f"shr((int64_t){self.ref(b.srcs[0], 'i')} * (int64_t){self.ref(b.srcs[1], 'i')}, {sh})"
        elif b.op in ("add", "sub"):
            common = min(src[0].s, src[1].s)
            a = f"shr({self.ref(b.srcs[0], 'i')}, {src[0].s - common})"
            c = f"shr({self.ref(b.srcs[1], 'i')}, {src[1].s - common})"
            sign = "+" if b.op == "add" else "-"
            val = f"shr({a} {sign} {c}, {common - d.s})"
        elif b.op == "smul":
            cf = smul_format(b.const)
            val = f"shr((int64_t){self.ref(b.srcs[0], 'i')} * {cf.encode(b.const)}LL, {src[0].s + cf.s - d.s})"
        elif b.op == "relu":
            self.emit(f"int64_t v = {self.ref(b.srcs[0], 'i')};", 2)
            val = f"shr(v > 0 ? v : 0, {src[0].s - d.s})"
        elif b.op == "reshape":
            val = f"shr({self.ref(b.srcs[0], 'i')}, {src[0].s - d.s})"
        elif b.op in ("sigmoid", "tanh", "exp"):
            self.emit(f"double x = ldexp((double){self.ref(b.srcs[0], 'i')}, {-src[0].s});", 2)
            expr = {"sigmoid": "1.0 / (1.0 + exp(-x))", "tanh": "tanh(x)", "exp": "exp(x)"}[b.op]
            self.emit(f"double y = floor(ldexp({expr}, {d.s}));", 2)
            val = f"to_word(y, {d.qmin}LL, {d.qmax}LL)"
        else:
            raise CodegenError(f"unsupported operator {b.op!r}")
        self.emit(self.store(b.name, "i", val), 2)
        self.emit("}", 1)


def emit_c(
    program: Program, rho: Mapping[str, int], params: RepParams, mm: MemoryMap, weights: Mapping[str, "object"]
) -> EmittedProgram:
    """Standalone C source with ``void predict(const double *input, int32_t *output)``.

    ``params`` must be fixed point and ``mm`` a placement of the RAM tensors
    at their ``rho`` sizes. Output words are the raw integers of the
    returned tensor at its scale.
    """
    import numpy as np

    if params.rep != "fixed":
        raise CodegenError(f"C emission supports fixed point only, not {params.rep}")
    fmt: dict[str, FixedFormat] = {}
    for t in program.tensor_names:
        f = params.format_for(t, rho[t])
        if f.b not in C_TYPES:
            raise CodegenError(f"{t}: no C integer type for {f.b}-bit words (use 8, 16 or 32)")
        fmt[t] = f
    for t in program.ram_tensors:
        if t not in mm.offsets:
            raise CodegenError(f"internal error: memory map has no offset for {t}")
        need = math.ceil(fmt[t].b * program.cardinality(t) / 8)
        if mm.offsets[t] + need > mm.peak:
            raise CodegenError(f"internal error: {t} does not fit the {mm.peak}-byte scratch")

    em = _Emitter(program, fmt, mm)
    widths = sorted({fmt[t].b for t in program.ram_tensors})
    out_t = program.output
    in_size = program.cardinality(program.input.name) if program.input is not None else 0
    out_size = program.cardinality(out_t)

    head = [
        "#include <math.h>",
        "#include <stdint.h>",
        "#include <string.h>",
        "",
        f"#define INPUT_SIZE {in_size}",
        f"#define OUTPUT_SIZE {out_size}",
        f"#define SCRATCH_SIZE {mm.peak}",
        "",
    ]
    if mm.peak > 0:
        head.append(f"static uint8_t scratch[{mm.peak}];")
        head.append("")
    for p in program.params:
        f = fmt[p.name]
        words = f.encode_array(np.asarray(weights[p.name], dtype=np.float64)).ravel()
        body = ", ".join(str(int(w)) for w in words)
        head.append(f"/* {p.name}: {f.b} bits, scale {f.s} */")
        head.append(f"static const {C_TYPES[f.b]} W_{p.name}[{len(words)}] = {{{body}}};")
    head.append("")
    head += [
        "static inline int64_t shr(int64_t v, int sh)",
        "{",
        "    if (sh >= 0)",
        "        return v >> (sh > 63 ? 63 : sh);",
        "    return v * ((int64_t)1 << -sh);",
        "}",
        "",
        "static inline int64_t sat(int64_t v, int64_t lo, int64_t hi)",
        "{",
        "    return v < lo ? lo : (v > hi ? hi : v);",
        "}",
        "",
        "static inline int64_t to_word(double y, int64_t lo, int64_t hi)",
        "{",
        "    if (isnan(y))",
        "        return 0;",
        "    if (y <= (double)lo)",
        "        return lo;",
        "    if (y >= (double)hi)",
        "        return hi;",
        "    return (int64_t)y;",
        "}",
        "",
    ]
    for w in widths:
        ct = C_TYPES[w]
        head += [
            f"static inline int64_t ld{w}(uint32_t off)",
            "{",
            f"    {ct} v;",
            f"    memcpy(&v, scratch + off, sizeof v);",
            "    return v;",
            "}",
            "",
            f"static inline void st{w}(uint32_t off, int64_t v)",
            "{",
            f"    {ct} w = ({ct})v;",
            f"    memcpy(scratch + off, &w, sizeof w);",
            "}",
            "",
        ]

    em.emit("void predict(const double *input, int32_t *output)")
    em.emit("{")
    if program.input is None:
        em.emit("(void)input;", 1)
    else:
        x = program.input.name
        f = fmt[x]
        em.emit("for (int i = 0; i < INPUT_SIZE; i++)", 1)
        em.emit(em.store(x, "i", f"to_word(floor(ldexp(input[i], {f.s})), {f.qmin}LL, {f.qmax}LL)"), 2)
    for b in program.body:
        em.binding(b)
    em.emit("for (int i = 0; i < OUTPUT_SIZE; i++)", 1)
    em.emit(f"output[i] = (int32_t){em.ref(out_t, 'i')};", 2)
    em.emit("}")
    em.emit()

    main = [
        "#ifdef TINYQUANT_MAIN",
        "#include <stdio.h>",
        "",
        "/* Reads INPUT_SIZE doubles per sample from stdin; prints one line of output words per sample. */",
        "int main(void)",
        "{",
        "    double in[INPUT_SIZE + 1];",
        "    int32_t out[OUTPUT_SIZE];",
        "    for (;;) {",
        "        for (int i = 0; i < INPUT_SIZE; i++)",
        "            if (scanf(\"%lf\", &in[i]) != 1)",
        "                return 0;",
        "        predict(in, out);",
        "        for (int i = 0; i < OUTPUT_SIZE; i++)",
        "            printf(i ? \" %ld\" : \"%ld\", (long)out[i]);",
        "        printf(\"\\n\");",
        "        if (INPUT_SIZE == 0)",
        "            return 0;",
        "    }",
        "}",
        "#endif",
        "",
    ]
    src = "\n".join(head + em.lines + main)
    return EmittedProgram(
        src,
        mm.peak,
        {t: mm.offsets[t] for t in program.ram_tensors},
        {t: (f.b, f.s) for t, f in fmt.items()},
        in_size,
        out_size,
    )


def occupancy_table(mm: MemoryMap, ranges: Sequence[LiveRange], cols: int = 64) -> str:
    """ASCII canvas: one row per instruction, bytes left to right, a letter per tensor."""
    names = [r.name for r in ranges]
    legend = {n: chr(ord("A") + i) if i < 26 else chr(ord("a") + i - 26) for i, n in enumerate(names[:52])}
    lines = [f"peak {mm.peak} bytes ({mm.method}{', optimal' if mm.optimal and mm.method == 'exact' else ''})"]
    if not ranges:
        return lines[0] + "\n"
    width = max(mm.peak, 1)
    scale = max(1, math.ceil(width / cols))
    n_instr = max(r.end for r in ranges) + 1
    lines.append("legend: " + ", ".join(f"{c}={n}" for n, c in legend.items()))
    lines.append(f"one column per {scale} byte{'s' if scale > 1 else ''}")
    for i in range(n_instr):
        row = ["."] * math.ceil(width / scale)
        live = []
        for r in ranges:
            if r.start <= i <= r.end and r.size > 0:
                live.append(r.name)
                off = mm.offsets[r.name]
                for c in range(off // scale, math.ceil((off + r.size) / scale)):
                    row[c] = legend.get(r.name, "#")
        lines.append(f"{i:4d} |{''.join(row)}| {' '.join(live)}")
    return "\n".join(lines) + "\n"


def emit_memory_map(mm: MemoryMap, ranges: Optional[Sequence[LiveRange]] = None) -> tuple[dict, str]:
    """JSON document and text report for a memory map."""
    doc = mm.to_json()
    text = occupancy_table(mm, list(ranges or []))
    if mm.offsets:
        table = "\n".join(f"  {t:<12} offset {o:>8}  size {mm.sizes.get(t, 0):>8}" for t, o in mm.offsets.items())
        text = text + "offsets:\n" + table + "\n"
    return doc, text
