# -*- coding: utf-8 -*-
"""Console tracing for bench stages. Library modules stay silent; commands call these."""

import time
from contextlib import contextmanager
from typing import Iterator


@contextmanager
def trace(label: str, enabled: bool = True) -> Iterator[None]:
    """Bracket a stage with TRACE START/END lines and report its wall time."""
    if enabled:
        print(f"--- TRACE START: {label} ---")
    started = time.perf_counter()
    try:
        yield
    finally:
        if enabled:
            print(f"--- TRACE END: {label} ({time.perf_counter() - started:.2f} s) ---")


def banner(title: str, enabled: bool = True) -> None:
    if enabled:
        print("\n" + "=" * 60)
        print(title)
        print("=" * 60)


def say(message: str, enabled: bool = True) -> None:
    if enabled:
        print(message)
