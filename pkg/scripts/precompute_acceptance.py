#!/usr/bin/env python3
"""Precompute the heavy acceptance-suite experiments into the run store.

Safe to interrupt and re-run: completed runs are skipped.  The store
location comes from TWEEZERLAB_ACCEPTANCE_STORE (default:
<repo>/acceptance-store).
"""

import datetime
import sys

from tweezerlab import repro


def log(msg):
    stamp = datetime.datetime.now().strftime("%H:%M:%S")
    print(f"[{stamp}] {msg}", flush=True)


if __name__ == "__main__":
    store = repro.default_store()
    log(f"store: {store.root}")
    repro.ensure_all(store, log=log)
    log("done")
    sys.exit(0)
