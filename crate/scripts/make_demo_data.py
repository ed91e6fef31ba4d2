"""Regenerates data/demo: a grammar-generated training corpus, a 20-stimulus
reading bundle with synthetic eye-tracking measurements, and word counts.

Output is a pure function of SEED; rerunning must leave the files unchanged.
"""

import csv
import math
import random
from collections import Counter
from pathlib import Path

SEED = 20261018
OUT = Path(__file__).resolve().parent.parent / "data" / "demo"
CORPUS_BYTES = 50_000

NAMES = ["Anne", "Tom", "Mira", "Jonas", "Clara", "Pete", "Lena", "Omar"]
DET = ["the", "a", "every", "that", "one"]
ADJ = ["old", "quiet", "small", "bright", "heavy", "strange", "green", "careful", "tired", "warm", "narrow", "loud"]
NOUN = ["dog", "river", "teacher", "window", "garden", "letter", "farmer", "boat", "song", "lamp", "market",
        "child", "bridge", "storm", "kitchen", "horse", "story", "candle", "village", "doctor"]
VERB_T = ["saw", "found", "lost", "carried", "painted", "heard", "followed", "watched", "opened", "cleaned", "sold", "built"]
VERB_I = ["laughed", "waited", "slept", "arrived", "left", "smiled", "listened", "worked", "stopped", "returned"]
ADV = ["slowly", "quickly", "again", "quietly", "today", "there", "early", "later"]
PREP = ["near", "behind", "under", "across", "beside", "inside"]
CONJ = ["and", "but", "so"]


def noun_phrase(r):
    if r.random() < 0.2:
        return [r.choice(NAMES)]
    words = [r.choice(DET)]
    for _ in range(r.choice([0, 0, 1, 1, 2])):
        words.append(r.choice(ADJ))
    words.append(r.choice(NOUN))
    if r.random() < 0.25:
        words += [r.choice(PREP)] + [r.choice(DET), r.choice(NOUN)]
    return words


def clause(r):
    words = noun_phrase(r)
    if r.random() < 0.6:
        words += [r.choice(VERB_T)] + noun_phrase(r)
    else:
        words.append(r.choice(VERB_I))
    if r.random() < 0.4:
        words.append(r.choice(ADV))
    return words


def sentence(r):
    words = clause(r)
    if r.random() < 0.35:
        words[-1] += ","
        words += [r.choice(CONJ)] + clause(r)
    words[0] = words[0][0].upper() + words[0][1:]
    words[-1] += "."
    return " ".join(words)


def main():
    r = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)

    corpus, size = [], 0
    while size < CORPUS_BYTES:
        s = sentence(r)
        corpus.append(s)
        size += len(s) + 1
    (OUT / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")

    counts = Counter(w.lower() for line in corpus for w in line.split())
    with open(OUT / "frequencies.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["word", "count"])
        for word, n in sorted(counts.items()):
            w.writerow([word, n])

    alphabet = set("".join(corpus))
    stimuli = []
    while len(stimuli) < 20:
        s = sentence(r)
        if 7 <= len(s.split()) <= 16 and set(s) <= alphabet and s not in stimuli:
            stimuli.append(s)
    with open(OUT / "stimuli.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["stimulus_id", "text"])
        for i, s in enumerate(stimuli, 1):
            w.writerow([f"s{i:02d}", s])

    # Reading measures driven by length and frequency only, eight readers.
    total = sum(counts.values())
    with open(OUT / "measurements.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["stimulus_id", "roi_index", "participant_id", "measure", "value"])
        for i, s in enumerate(stimuli, 1):
            for k, word in enumerate(s.split(), 1):
                zipf = math.log10(max(counts[word.lower()], 1) / total * 1e9)
                for p in range(1, 9):
                    skip_p = 1 / (1 + math.exp(-(1.2 - 0.45 * len(word) + 0.3 * (zipf - 7))))
                    skipped = r.random() < skip_p
                    first = 190 + 6 * len(word) - 9 * (zipf - 7) + r.gauss(0, 25)
                    gaze = first + (0 if r.random() < 0.7 else r.uniform(80, 180))
                    total_t = gaze + (0 if r.random() < 0.8 else r.uniform(100, 250))
                    sid = f"s{i:02d}"
                    w.writerow([sid, k, f"p{p}", "SkipRate", int(skipped)])
                    w.writerow([sid, k, f"p{p}", "FirstFixationDuration", round(first)])
                    w.writerow([sid, k, f"p{p}", "GazeDuration", round(gaze)])
                    w.writerow([sid, k, f"p{p}", "TotalDuration", round(total_t)])


if __name__ == "__main__":
    main()
