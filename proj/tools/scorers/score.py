#!/usr/bin/env python3
"""Metric adapter for `fmse`: score.py <metric> <estimate.wav> <reference.wav>.

Prints one number. Needs the usual third-party packages:
  pesq   -> pip install pesq
  estoi  -> pip install pystoi
  dnsmos -> pip install speechmos   (OVRL; reference unused)
  wer    -> pip install openai-whisper jiwer
            (the clean reference transcribed by the same model is the target)
"""
import sys

import numpy as np
import soundfile as sf


def load(path):
    x, sr = sf.read(path, dtype="float64")
    if x.ndim > 1:
        x = x.mean(axis=1)
    return x, sr


def main():
    if len(sys.argv) != 4:
        sys.exit("usage: score.py {pesq,estoi,dnsmos,wer} estimate.wav reference.wav")
    metric, est_path, ref_path = sys.argv[1:]
    est, sr = load(est_path)
    ref, _ = load(ref_path)
    n = min(len(est), len(ref))
    est, ref = est[:n], ref[:n]

    if metric == "pesq":
        from pesq import pesq
        value = pesq(sr, ref, est, "wb")
    elif metric == "estoi":
        from pystoi import stoi
        value = stoi(ref, est, sr, extended=True)
    elif metric == "dnsmos":
        from speechmos import dnsmos
        value = dnsmos.run(est.astype(np.float32), sr=sr)["ovrl_mos"]
    elif metric == "wer":
        import jiwer
        import whisper
        model = whisper.load_model("base.en")
        hyp = model.transcribe(est.astype(np.float32))["text"]
        target = model.transcribe(ref.astype(np.float32))["text"]
        value = jiwer.wer(target.lower(), hyp.lower()) if target.strip() else 0.0
    else:
        sys.exit(f"unknown metric {metric}")
    print(f"{value:.6f}")


if __name__ == "__main__":
    main()
