"""Independent reference computations for values frozen into the C++ tests.

Run with `python3 tests/oracles/derived_values.py`. Uses only the standard
library so it shares no code with the implementation.
"""
import itertools
import math
from collections import Counter


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def attention_example():
    # Q=[[1,0]], K=I, V=I, d_k=2
    scores = [1 / math.sqrt(2), 0.0]
    return softmax(scores)


def positional(pos, d):
    out = []
    for i in range(d):
        k = i // 2
        angle = pos / (10000 ** (2 * k / d))
        out.append(math.sin(angle) if i % 2 == 0 else math.cos(angle))
    return out


def kl(target, pred):
    return sum(t * (math.log(t) - math.log(p)) for t, p in zip(target, pred) if t > 0)


def adam_first_step(g, lr=1e-5, b1=0.9, b2=0.99, eps=1e-8):
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    m_hat = m / (1 - b1)
    v_hat = v / (1 - b2)
    return lr * m_hat / (math.sqrt(v_hat) + eps)


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(cand, ref, max_n):
    if not cand:
        return 0.0
    logs = 0.0
    for n in range(1, max_n + 1):
        c = ngrams(cand, n)
        r = ngrams(ref, n)
        total = sum(c.values())
        match = sum(min(k, r[g]) for g, k in c.items())
        if total == 0 or match == 0:
            return 0.0
        logs += math.log(match / total)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(logs / max_n)


def tiou(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union if union > 0 else 0.0


FIXTURE_REFS = {
    "v1": [((0, 10), "a man is cutting bread"), ((10, 20), "the man eats the bread")],
    "v2": [((0, 30), "a dog runs in the park")],
}
FIXTURE_PREDS = {
    "v1": [((0, 10), "a man is cutting bread"), ((5, 15), "the man eats bread"),
           ((12, 20), "the man eats the bread")],
    "v2": [((0, 18), "a dog runs in a park")],
}
THRESHOLDS = [0.3, 0.5, 0.7, 0.9]


def dense_eval(preds, refs, max_n):
    per_threshold = []
    for thr in THRESHOLDS:
        video_scores = []
        for vid, rlist in refs.items():
            plist = preds.get(vid, [])
            if not plist:
                video_scores.append(0.0)
                continue
            total = 0.0
            for span, sent in plist:
                best, best_o = None, -1.0
                for rspan, rsent in rlist:
                    o = tiou(span, rspan)
                    if o > best_o:
                        best, best_o = rsent, o
                if best_o > thr:
                    total += sentence_bleu(sent.split(), best.split(), max_n)
            video_scores.append(total / len(plist))
        per_threshold.append(sum(video_scores) / len(video_scores))
    return per_threshold, sum(per_threshold) / len(per_threshold)


def synth_ceiling(ps, pa, po, visible):
    best = {}
    for (s, a, o) in itertools.product(range(len(ps)), range(len(pa)), range(len(po))):
        key = tuple(x if v else None for x, v in zip((s, a, o), visible))
        best[key] = max(best.get(key, 0.0), ps[s] * pa[a] * po[o])
    return sum(best.values())


if __name__ == "__main__":
    print("softmax([1,2,3])", softmax([1, 2, 3]))
    print("attention weights", attention_example())
    print("PE pos=1 d=4", positional(1, 4))
    print("KL([.8,.1,.1] || uniform)", kl([0.8, 0.1, 0.1], [1 / 3] * 3))
    print("BP c=3 r=6", math.exp(1 - 6 / 3))
    print("Adam first step g=1", adam_first_step(1.0))
    for n in (1, 2, 3, 4):
        pt, final = dense_eval(FIXTURE_PREDS, FIXTURE_REFS, n)
        print(f"fixture Bleu_{n}", [repr(x) for x in pt], repr(final))
    u = [0.25] * 4
    skew = [0.55, 0.15, 0.15, 0.15]
    print("ceiling uniform visual-only", synth_ceiling(u, u, u, (False, False, True)))
    for name, vis in [("speech", (1, 0, 0)), ("audio", (0, 1, 0)), ("visual", (0, 0, 1)),
                      ("audio+visual", (0, 1, 1)), ("all", (1, 1, 1))]:
        print(f"ceiling skewed {name}", synth_ceiling(u, skew, u, vis))
