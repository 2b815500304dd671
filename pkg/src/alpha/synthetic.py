"""Planted-signal synthetic traces for exercising the whole pipeline.

Benign instructions come from an innocuous pool; malicious functions mix in
marker instructions at a fixed rate, giving the function classifier a
distributional signal. Shared "common" function pools create the corpus
overlap the first-pass SVM feeds on: ordinary samples are overlap-heavy,
novelty samples consist almost entirely of fresh functions and should land
in the confidence band.

Run ``python -m alpha.synthetic OUTDIR`` to write a train/calibration/test
trace tree for the command-line tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import BENIGN, MALICIOUS, RawSample, TimedInstruction

BENIGN_OPS = [
    "mov esp, esi", "mov ebp, esp", "push ebp", "push esi", "pop esi",
    "pop ebp", "pop ebx", "pop edi", "test eax, eax", "xor ecx, ecx",
    "xor eax, eax", "add eax, 0x4", "sub esp, 0x10", "cmp eax, ebx",
    "inc ecx", "dec edx", "lea eax, [ebx+0x8]",
    "mov eax, dword ptr [ebp-0x8]", "mov dword ptr [ebp-0x4], eax",
    "shr eax, 0x2", "shl edx, 0x1", "and eax, 0xff", "or ecx, ecx",
    "jnz 0x401a2b3c", "jz 0x4020b1aa", "mov eax, dword ptr fs:[0x30]",
    "movzx eax, al", "neg eax", "not edx", "adc eax, 0x0", "sbb edx, edx",
]

MARKER_OPS = [
    "xor byte ptr [esi], 0x5a", "xor dword ptr [edi], 0x7f3a2b11",
    "rdtsc", "cpuid", "sidt [esp]", "sldt eax", "str eax",
    "in eax, dx", "out dx, eax", "rol eax, 0x7", "ror ebx, 0x3",
    "xchg esi, edi", "bswap eax", "int 0x2e", "mov cr0, eax",
]

BOUNDARY_OPS = ["ret", "ret 0x4", "ret 0x8", "ret 0x10",
                "call 0x77e21b30", "call 0x7c801e16"]

MARKER_RATE = 0.6


@dataclass
class SyntheticDataset:
    corpus_samples: list[RawSample]
    calibration: list[RawSample]
    test: list[RawSample]

    @property
    def train_samples(self) -> list[RawSample]:
        return self.corpus_samples + self.calibration


def _pick(rng: np.random.Generator, pool: list[str]) -> str:
    return pool[int(rng.integers(len(pool)))]


def _benign_function(rng: np.random.Generator) -> tuple[str, ...]:
    body = [_pick(rng, BENIGN_OPS) for _ in range(int(rng.integers(3, 10)))]
    return tuple(body + [_pick(rng, BOUNDARY_OPS)])


def _malicious_function(rng: np.random.Generator) -> tuple[str, ...]:
    body = [
        _pick(rng, MARKER_OPS) if rng.random() < MARKER_RATE else _pick(rng, BENIGN_OPS)
        for _ in range(int(rng.integers(3, 10)))
    ]
    return tuple(body + [_pick(rng, BOUNDARY_OPS)])


# per-function sourcing weights: (common benign, common malicious, novel)
_PROFILES = {
    "corpus_benign": (0.65, 0.00, 0.35),
    "corpus_malicious": (0.35, 0.30, 0.35),
    "ordinary_benign": (0.60, 0.04, 0.36),
    "ordinary_malicious": (0.32, 0.33, 0.35),
    "novelty_benign": (0.10, 0.00, 0.90),
    "novelty_malicious": (0.06, 0.20, 0.74),
}


class _Generator:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.common_benign = [_benign_function(self.rng) for _ in range(40)]
        self.common_malicious = [_malicious_function(self.rng) for _ in range(25)]

    def _function(self, profile: str, malicious: bool) -> tuple[str, ...]:
        w_common_b, w_common_m, _ = _PROFILES[profile]
        roll = self.rng.random()
        if roll < w_common_b:
            return self.common_benign[int(self.rng.integers(len(self.common_benign)))]
        if roll < w_common_b + w_common_m:
            return self.common_malicious[int(self.rng.integers(len(self.common_malicious)))]
        return _malicious_function(self.rng) if malicious else _benign_function(self.rng)

    def sample(
        self,
        profile: str,
        sample_id: str,
        n_functions: int,
        gap_ms: tuple[int, int] = (330, 470),
    ) -> RawSample:
        malicious = profile.endswith("malicious")
        lines: list[str] = []
        for _ in range(n_functions):
            lines.extend(self._function(profile, malicious))
        t = int(self.rng.integers(0, 200))
        instructions = []
        for text in lines:
            fields = text.split(None, 1)
            instructions.append(TimedInstruction(
                mnemonic=fields[0],
                operands=fields[1] if len(fields) > 1 else "",
                timestamp_ms=t,
                thread_id="1a2b",
            ))
            t += int(self.rng.integers(gap_ms[0], gap_ms[1]))
        if malicious:
            return RawSample(sample_id, MALICIOUS, tuple(instructions),
                             malware_type="trojan", family="planted")
        return RawSample(sample_id, BENIGN, tuple(instructions), family="util")


def make_planted_dataset(
    corpus_benign: int = 70,
    corpus_malicious: int = 70,
    calib_benign: int = 30,
    calib_malicious: int = 30,
    test_benign: int = 20,
    test_malicious: int = 20,
    functions_per_sample: int = 120,
    seed: int = 0,
) -> SyntheticDataset:
    """Build a deterministic planted-signal dataset, half ordinary, half novelty."""
    gen = _Generator(seed)
    n = functions_per_sample

    corpus_samples = [
        gen.sample("corpus_benign", f"cb{i:03d}", n) for i in range(corpus_benign)
    ] + [
        gen.sample("corpus_malicious", f"cm{i:03d}", n) for i in range(corpus_malicious)
    ]

    def cohort(prefix: str, count: int, kind: str) -> list[RawSample]:
        ordinary = count // 2
        out = []
        for i in range(count):
            profile = ("ordinary_" if i < ordinary else "novelty_") + kind
            gap = (330, 470)
            # a couple of short novelty traces exercise the window fallback
            if i >= ordinary and (i - ordinary) < 2 and prefix.startswith("t"):
                gap = (90, 140)
            out.append(gen.sample(profile, f"{prefix}{i:03d}", n, gap))
        return out

    calibration = cohort("lb", calib_benign, "benign") + cohort("lm", calib_malicious, "malicious")
    test = cohort("tb", test_benign, "benign") + cohort("tm", test_malicious, "malicious")
    return SyntheticDataset(corpus_samples, calibration, test)


def trace_filename(sample: RawSample) -> str:
    if sample.label == MALICIOUS:
        type_text = (sample.malware_type or "malware").capitalize()
    else:
        type_text = "Benign"
    family = sample.family or "app"
    return f"{type_text}-{family}-{sample.sample_id}.trace"


def write_trace(sample: RawSample, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / trace_filename(sample)
    lines = []
    for i in sample.instructions:
        prefix = f"{i.timestamp_ms}|{i.thread_id or ''}|" if i.timestamp_ms is not None else ""
        lines.append(prefix + i.text)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_traces(samples, out_dir: str | Path) -> list[Path]:
    return [write_trace(s, out_dir) for s in samples]


def _main() -> None:
    import argparse

    parser = argparse.ArgumentParser(description="write a synthetic trace tree")
    parser.add_argument("out", help="output directory (train/, calib/, test/)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", type=float, default=1.0,
                        help="shrink or grow every cohort by this factor")
    args = parser.parse_args()
    k = args.scale
    data = make_planted_dataset(
        corpus_benign=max(2, int(70 * k)), corpus_malicious=max(2, int(70 * k)),
        calib_benign=max(2, int(30 * k)), calib_malicious=max(2, int(30 * k)),
        test_benign=max(1, int(20 * k)), test_malicious=max(1, int(20 * k)),
        seed=args.seed,
    )
    root = Path(args.out)
    write_traces(data.corpus_samples, root / "train")
    write_traces(data.calibration, root / "calib")
    write_traces(data.test, root / "test")
    print(f"wrote {len(data.corpus_samples)} train, {len(data.calibration)} calibration, "
          f"{len(data.test)} test traces under {root}")


if __name__ == "__main__":
    _main()
