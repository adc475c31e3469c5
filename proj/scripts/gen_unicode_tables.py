#!/usr/bin/env python3
"""Regenerates include/bookqa/detail/unicode_tables.hpp from Python's unicodedata."""
import string
import sys
import unicodedata

MAX_CP = 0x110000


def ranges(pred):
    out, start = [], None
    for cp in range(MAX_CP):
        if pred(cp):
            if start is None:
                start = cp
        elif start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def is_punct(cp):
    ch = chr(cp)
    return unicodedata.category(ch).startswith("P") or ch in string.punctuation


def is_space(cp):
    return chr(cp).isspace()


def lower_pairs():
    pairs = []
    for cp in range(MAX_CP):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        low = chr(cp).lower()
        if len(low) == 1 and ord(low) != cp:
            pairs.append((cp, ord(low)))
    return pairs


def emit_ranges(name, rs):
    body = ",\n".join(
        "    {0x%04X, 0x%04X}" % r for r in rs)
    return (f"inline constexpr CodepointRange {name}[] = {{\n{body}\n}};\n")


def main():
    out = sys.stdout
    out.write("// Generated by scripts/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
              % unicodedata.unidata_version)
    out.write("#pragma once\n\n#include <cstdint>\n\nnamespace bookqa::detail {\n\n")
    out.write("struct CodepointRange {\n    char32_t first;\n    char32_t last;\n};\n\n")
    out.write("struct CaseMapping {\n    char32_t from;\n    char32_t to;\n};\n\n")
    out.write("// General category P* plus the ASCII symbol set.\n")
    out.write(emit_ranges("kPunctuationRanges", ranges(is_punct)))
    out.write("\n")
    out.write(emit_ranges("kWhitespaceRanges", ranges(is_space)))
    out.write("\n// Simple (single code point) lowercase mappings.\n")
    body = ",\n".join("    {0x%04X, 0x%04X}" % p for p in lower_pairs())
    out.write(f"inline constexpr CaseMapping kLowercaseMap[] = {{\n{body}\n}};\n")
    out.write("\n}  // namespace bookqa::detail\n")


if __name__ == "__main__":
    main()
