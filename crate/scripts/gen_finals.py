#!/usr/bin/env python3
"""Regenerate crates/core/data/finals.tsv: every GB2312 hanzi with its most
common pinyin final (pypinyin, strict finals, `v` spelled as `ü`)."""
import sys
from pypinyin import pinyin, Style


def gb2312_hanzi():
    for row in range(0xB0, 0xF8):
        for col in range(0xA1, 0xFF):
            try:
                yield bytes([row, col]).decode("gb2312")
            except UnicodeDecodeError:
                continue


def main(out):
    with open(out, "w", encoding="utf-8") as f:
        f.write("# word<TAB>final, generated by scripts/gen_finals.py\n")
        for ch in gb2312_hanzi():
            final = pinyin(ch, style=Style.FINALS, strict=True)[0][0]
            if not final or not final.isalpha():
                continue
            f.write(f"{ch}\t{final.replace('v', 'ü')}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/finals.tsv")
