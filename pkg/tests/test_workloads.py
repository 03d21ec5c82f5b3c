from fractions import Fraction

import pytest

from nativesim import TargetConfig
from nativesim.trace import TraceSink, profile

from oracles import amdahl, nqueens_solutions


def jpeg_reference():
    """Host-side rerun of the bundled JPEG-style pipeline: (bits, checksum)."""
    blocks = []
    for it in range(80):
        x, y = (it % 10) * 16, (it // 10) * 16
        rgb = [0] * 768
        for j in range(16):
            for i in range(0, 16, 2):
                p = (x + i) * 7 + (y + j) * 13
                k = (j * 16 + i) * 3
                rgb[k:k + 6] = [p & 255, (p >> 1) & 255, (p >> 2) & 255,
                                (p + 7) & 255, ((p + 7) >> 1) & 255, ((p + 7) >> 2) & 255]
        Y = [[[0] * 64 for _ in range(2)] for _ in range(2)]
        cb, cr = [0] * 64, [0] * 64
        for j in range(0, 16, 2):
            for i in range(0, 16, 2):
                k = (j * 16 + i) * 3
                r, g, b = rgb[k], rgb[k + 1], rgb[k + 2]
                v = ((j & 7) << 3) + (i & 7)
                out = Y[j >> 3][i >> 3]
                out[v] = (77 * r + 150 * g + 29 * b) >> 8
                out[v + 1] = (77 * g + 150 * b + 29 * r) >> 8
                out[v + 8] = (77 * b + 150 * r + 29 * g) >> 8
                out[v + 9] = (r + g + b) >> 2
                c = (j >> 1) * 8 + (i >> 1)
                cb[c] = ((b - g) >> 1) + 128
                cr[c] = ((r - g) >> 1) + 128
        blocks.append(([dct(Y[0][0]), dct(Y[0][1]), dct(Y[1][0]), dct(Y[1][1])], dct(cb), dct(cr)))
    bits, checksum = 0, 0
    for ys, cb, cr in blocks:
        for ctx, data in [(0, d) for d in ys] + [(1, cb), (2, cr)]:
            run = nbits = 0
            for v in data:
                if v == 0:
                    run += 1
                else:
                    mag = abs(v)
                    nbits += 1 + sum(mag > t for t in (1, 3, 7, 15, 31)) + run + ctx
                    checksum = (checksum * 31 + v + run) & 65535
                    run = 0
            bits += nbits + (4 if run > 0 else 0)
    return bits, checksum


def dct(data):
    out = [0] * 64
    for u in range(8):
        r = u * 8
        d = data[r:r + 8]
        s07, d07 = d[0] + d[7], d[0] - d[7]
        s16, d16 = d[1] + d[6], d[1] - d[6]
        s25, d25 = d[2] + d[5], d[2] - d[5]
        s34, d34 = d[3] + d[4], d[3] - d[4]
        out[r:r + 8] = [
            (s07 + s16 + s25 + s34) >> 3,
            (d07 * 45 + d16 * 38 + d25 * 25 + d34 * 9) >> 8,
            ((s07 - s34) * 42 + (s16 - s25) * 17) >> 8,
            (d07 * 38 - d16 * 9 - d25 * 45 - d34 * 25) >> 8,
            (s07 - s16 - s25 + s34) >> 3,
            (d07 * 25 - d16 * 45 + d25 * 9 + d34 * 38) >> 8,
            ((s07 - s34) * 17 - (s16 - s25) * 42) >> 8,
            (d07 * 9 - d16 * 25 + d25 * 38 - d34 * 45) >> 8,
        ]
    return out


@pytest.mark.parametrize("cores", [1, 5, 16])
def test_jpeg_outputs(jpeg, cores):
    assert jpeg.run(TargetConfig(core_count=cores)).outputs == jpeg_reference()


def test_nqueens_dominant_function(tmp_path, nqueens):
    sink = TraceSink()
    nqueens.run(TargetConfig(core_count=16), sink)
    report = profile(sink.events(), sink.defs)
    assert report.dominant().name == "check_acceptable"
    assert report.dominant().calls == 5 ** 5
    assert nqueens_solutions(5) == 10


def test_jpeg_serial_share_grows(jpeg):
    flat = dict(shared_mem_extra_cycles=Fraction(0))
    shares, runs = [], {}
    for cores in (1, 2, 4, 8, 16):
        sink = TraceSink()
        runs[cores] = jpeg.run(TargetConfig(core_count=cores, **flat), sink)
        report = profile(sink.events(), sink.defs)
        shares.append(report.function("huffman_encode").inclusive / runs[cores].target_cycles)
    assert shares == sorted(shares) and shares[-1] > 2 * shares[0]
    # the serial stage itself costs the same at every core count, so its share
    # follows the Amdahl curve of the whole program
    s = 1 - runs[1].parallel_cycles / runs[1].target_cycles
    for share, cores in zip(shares, (1, 2, 4, 8, 16)):
        assert share == pytest.approx(shares[0] * amdahl(s, cores), rel=0.05)
