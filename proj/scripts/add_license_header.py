#!/usr/bin/env python3
"""Prepend the license header to every C++ source under the project dirs.

Files that already start with the header are left untouched.
"""
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
DIRS = ["core", "tools", "tests", "benchmarks"]


def main() -> int:
    header = (ROOT / "cmake" / "license_header.txt").read_text().rstrip("\n") + "\n\n"
    changed = 0
    for d in DIRS:
        for path in sorted((ROOT / d).rglob("*")):
            if path.suffix not in (".hpp", ".cpp") or not path.is_file():
                continue
            text = path.read_text()
            if text.startswith(header):
                continue
            path.write_text(header + text)
            changed += 1
    print(f"license header added to {changed} files")
    return 0


if __name__ == "__main__":
    sys.exit(main())
