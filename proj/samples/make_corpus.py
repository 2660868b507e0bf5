#!/usr/bin/env python3
"""Writes a tiny synthetic four-domain corpus (16 kHz mono PCM16) plus a manifest."""
import json
import math
import random
import struct
import sys
import wave
from pathlib import Path

SR = 16000


def tone(f0, seconds, harmonics, decay=0.0, vibrato=0.0):
    n = int(SR * seconds)
    out = []
    for i in range(n):
        t = i / SR
        f = f0 * (1 + vibrato * math.sin(2 * math.pi * 5.5 * t))
        v = sum(0.6 ** k * math.sin(2 * math.pi * f * (k + 1) * t) for k in range(harmonics))
        out.append(v * math.exp(-decay * t))
    return out


def noise(seconds, seed):
    rng = random.Random(seed)
    y1 = y2 = 0.0
    out = []
    for i in range(int(SR * seconds)):
        y = rng.gauss(0, 1) + 1.9 * y1 - 0.94 * y2
        y2, y1 = y1, y
        out.append(y * (0.5 + 0.5 * math.cos(2 * math.pi * 3 * i / SR)))
    return out


def write(path, x):
    peak = max(abs(v) for v in x) or 1.0
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SR)
        w.writeframes(b"".join(struct.pack("<h", int(32767 * 0.5 * v / peak)) for v in x))


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clips = [
        ("speech_a.wav", "speech", [v * (0.55 + 0.45 * math.sin(2 * math.pi * 4 * i / SR)) for i, v in enumerate(tone(120, 2.0, 20))]),
        ("vocal_a.wav", "vocal", tone(220, 2.0, 12, vibrato=0.03)),
        ("music_a.wav", "music", tone(261.63, 2.0, 8, decay=1.5)),
        ("other_a.wav", "other", noise(2.0, 7)),
    ]
    with open(out / "manifest.jsonl", "w") as m:
        for name, domain, x in clips:
            write(out / name, x)
            m.write(json.dumps({"path": name, "domain": domain, "duration_sec": len(x) / SR}) + "\n")
    print(out / "manifest.jsonl")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "corpus")
