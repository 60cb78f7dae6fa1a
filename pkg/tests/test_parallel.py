#!/usr/bin/env python3
"""
Test script for chunked data-parallel helpers.
Run this to verify chunking and order-preserving maps.
"""

import sys
from pathlib import Path

# Add hj-sdk to path
repo_root = Path(__file__).resolve().parent.parent
sdk_dir = repo_root / "hj-sdk"
if str(sdk_dir) not in sys.path:
    sys.path.insert(0, str(sdk_dir))

from contact_hj import parallel


def test_chunk_bounds():
    """Test contiguous, covering chunks."""
    bounds = parallel.chunk_bounds(10, 3)
    print(f"10 items in 3 chunks: {bounds}")
    assert bounds[0][0] == 0 and bounds[-1][1] == 10
    assert all(a[1] == b[0] for a, b in zip(bounds, bounds[1:]))
    assert parallel.chunk_bounds(2, 8) == [(0, 1), (1, 2)], "Never more chunks than items"
    assert parallel.chunk_bounds(0, 4) == []


def test_map_chunks_order():
    """Test that results come back in chunk order for any worker count."""
    try:
        for threads in (1, 3, 8):
            parallel.set_threads(threads)
            parts = parallel.map_chunks(lambda a, b: list(range(a, b)), 20)
            assert [i for part in parts for i in part] == list(range(20))
        parallel.set_threads(0)
        assert parallel.get_threads() == 1
    finally:
        parallel.set_threads(1)


if __name__ == "__main__":
    print("\n🧪 Testing Parallel Helpers\n")

    test_chunk_bounds()
    test_map_chunks_order()

    print("=" * 60)
    print("✅ Tests complete!")
    print("=" * 60)
