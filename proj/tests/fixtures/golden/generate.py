"""Regenerates the golden files in this directory.

bt_fits.json     Bradley-Terry MLE on smoothed win matrices, fitted by
                 scipy's L-BFGS-B on the negative log-likelihood.
dormant.json     Cosine top-n suggestions computed with a from-scratch
                 token-hashing embedder.

Run: python3 generate.py
"""
import json
import pathlib
import re

import numpy as np
from scipy.optimize import minimize

HERE = pathlib.Path(__file__).resolve().parent


def nll(beta, w):
    diff = beta[:, None] - beta[None, :]
    # log(1 + e^{-(b_i - b_j)}) for every ordered pair
    return float(np.sum(w * np.logaddexp(0.0, -diff)))


def grad(beta, w):
    diff = beta[:, None] - beta[None, :]
    p = 1.0 / (1.0 + np.exp(diff))  # P(j beats i)
    g = w * p
    return -(g.sum(axis=1) - g.sum(axis=0))


def fit(w_raw, alpha):
    w = np.array(w_raw, dtype=float)
    n = w.shape[0]
    w = w + alpha * (1.0 - np.eye(n))
    res = minimize(nll, np.zeros(n), args=(w,), jac=grad, method="L-BFGS-B",
                   options={"gtol": 1e-13, "ftol": 1e-16, "maxiter": 10000})
    beta = res.x - res.x.mean()
    lo, hi = beta.min(), beta.max()
    score = [50.0] * n if hi - lo < 1e-12 else list(100.0 * (beta - lo) / (hi - lo))
    return list(map(float, beta)), list(map(float, score))


def bt_cases():
    rng = np.random.default_rng(20240611)
    cases = [
        ([[0, 3], [1, 0]], 1.0),
        ([[0, 2, 1], [1, 0, 3], [2, 0, 0]], 1.0),
        ([[0, 5, 5], [5, 0, 5], [5, 5, 0]], 1.0),
        ([[0, 4, 4, 4], [0, 0, 4, 4], [0, 0, 0, 4], [0, 0, 0, 0]], 1.0),
        ([[0, 4, 4, 4], [0, 0, 4, 4], [0, 0, 0, 4], [0, 0, 0, 0]], 0.25),
    ]
    for n in (2, 3, 4, 5, 5, 6):
        w = rng.integers(0, 11, size=(n, n)).astype(float)
        np.fill_diagonal(w, 0.0)
        cases.append((w.tolist(), 1.0))
    out = []
    for w, alpha in cases:
        beta, score = fit(w, alpha)
        out.append({"w": w, "alpha": alpha, "beta": beta, "score": score})
    return out


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def tokens(text: str):
    raw = text.encode("utf-8")
    out, cur = [], bytearray()
    for b in raw:
        ch = chr(b)
        if (b < 0x80 and ch.isalnum()) or b >= 0x80:
            cur.append(ord(ch.lower()) if b < 0x80 else b)
        elif cur:
            out.append(bytes(cur))
            cur = bytearray()
    if cur:
        out.append(bytes(cur))
    return out or [raw]


def embed(text: str, dim: int = 256):
    v = np.zeros(dim)
    for t in tokens(text):
        v[fnv1a64(t) % dim] += 1.0
    return v / np.linalg.norm(v)


def dormant_case():
    skills = [
        ("pdf-merge", "PDF Merge", "Combine several PDF documents into a single file"),
        ("pdf-ocr", "PDF OCR", "Extract searchable text from scanned PDF pages"),
        ("slide-deck", "Slide Deck", "Build presentation slides from an outline"),
        ("chart-maker", "Chart Maker", "Plot bar, line and scatter charts from CSV data"),
        ("csv-clean", "CSV Clean", "Normalize columns and drop duplicate rows in CSV tables"),
        ("video-trim", "Video Trim", "Cut and concatenate video clips with ffmpeg"),
        ("audio-notes", "Audio Notes", "Transcribe meeting audio into timestamped notes"),
        ("web-scrape", "Web Scrape", "Fetch web pages and extract structured fields"),
        ("resume-tailor", "Resume Tailor", "Rewrite a resume for a specific job posting"),
        ("unit-tests", "Unit Tests", "Generate unit tests for Python modules"),
        ("lint-fix", "Lint Fix", "Apply style fixes reported by the linter"),
        ("poster", "Poster", "Design a printable event poster with large headline text"),
    ]
    active = ["slide-deck", "unit-tests", "poster"]
    queries = [
        "merge these PDF files and OCR the scanned pages",
        "turn the CSV sales data into charts",
        "transcribe the audio from yesterday's meeting",
        "scrape product prices from a web page",
        "zzz",
    ]
    entries = [(sid, embed(f"{name}: {desc}")) for sid, name, desc in skills if sid not in active]
    results = []
    for q in queries:
        qv = embed(q)
        scored = sorted(((float(qv @ e), sid) for sid, e in entries), key=lambda t: (-t[0], t[1]))
        results.append({"query": q, "n": 4,
                        "expected": [{"skill_id": sid, "similarity": s} for s, sid in scored[:4]]})
    return {
        "dimension": 256,
        "skills": [{"id": sid, "name": name, "description": desc} for sid, name, desc in skills],
        "active": active,
        "cases": results,
    }


def main():
    (HERE / "bt_fits.json").write_text(json.dumps(bt_cases(), indent=1) + "\n")
    (HERE / "dormant.json").write_text(json.dumps(dormant_case(), indent=1) + "\n")


if __name__ == "__main__":
    main()
