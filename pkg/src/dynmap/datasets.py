"""
Synthetic stand-in for a yearly product-market similarity edgelist of nine
technology firms, 1998-2017.

Firms follow smooth latent paths in three dimensions: hardware makers,
platform software vendors and telecom carriers start in separate groups, one
hardware maker drifts toward consumer software over time and two platform
vendors converge. Yearly scores decay with latent distance and carry
multiplicative log-normal noise, so independently fitted maps jitter from
year to year.
"""
import numpy as np

FIRMS = [
    # name, sic, start position, end position, start size
    ("APPLE INC", 36, (-1.0, 0.6, 0.0), (0.1, 0.5, 0.2), 70.0),
    ("AT&T INC", 48, (0.9, -1.0, 0.1), (0.9, -0.9, 0.0), 320.0),
    ("EBAY INC", 73, (0.5, 0.9, -0.2), (0.7, 0.6, -0.3), 100.0),
    ("INTUIT INC", 73, (0.6, 0.2, 0.4), (0.3, 0.5, 0.5), 40.0),
    ("MICRON TECHNOLOGY INC", 36, (-1.0, -0.1, -0.3), (-1.1, -0.2, -0.4), 60.0),
    ("MICROSOFT CORP", 73, (0.2, 0.1, -0.5), (0.5, -0.2, -0.2), 520.0),
    ("ORACLE CORP", 73, (0.8, -0.3, 0.0), (0.6, -0.3, -0.1), 190.0),
    ("US CELLULAR CORP", 48, (1.2, -1.3, -0.1), (1.3, -1.2, 0.2), 58.0),
    ("WESTERN DIGITAL CORP", 35, (-1.2, 0.3, 0.3), (-1.0, 0.1, 0.1), 32.0),
]
# sorts after every incumbent so it occupies the last row of the global roster
ENTRANT = ("ZETA STREAMING INC", 78, (0.6, 1.2, 0.3), (0.4, 0.9, 0.6), 2.0)
ENTRY_YEAR = 2002
YEARS = list(range(1998, 2018))
BANDWIDTH = 1.5
PEAK = 0.2
NOISE = 0.2
MIN_SCORE = 0.001
DECIMALS = 4
# multiplies each firm's start-to-end displacement
DRIFT = 2.0
WOBBLE = 0.4
# firm-specific traits that do not change over time; they keep any 2-D map
# from fitting perfectly
EXTRA_DIMS = 10
EXTRA_SCALE = 0.6


def tech_firm_paths(n_years=len(YEARS), unbalanced=False):
    """Latent positions ``(T, n, 3 + EXTRA_DIMS)``: linear drift plus a slow
    wobble in the first three dimensions, fixed traits in the rest."""
    firms = FIRMS + ([ENTRANT] if unbalanced else [])
    start = np.array([f[2] for f in firms])
    end = np.array([f[3] for f in firms])
    s = np.linspace(0.0, 1.0, n_years)[:, None, None]
    phase = np.arange(len(firms))[None, :, None]
    wobble = WOBBLE * np.sin(2 * np.pi * s + phase)
    moving = start + DRIFT * s * (end - start) + wobble
    traits = np.random.default_rng(len(firms)).standard_normal((len(firms), EXTRA_DIMS)) * EXTRA_SCALE
    return np.concatenate([moving, np.broadcast_to(traits, (n_years,) + traits.shape)], axis=2)


def load_tech_firms(unbalanced=False, seed=0):
    """Yearly similarity edgelist.

    Parameters
    ----------
    unbalanced : bool
        Add a tenth firm that enters in 2002.
    seed : int

    Returns
    -------
    list of dict
        Rows with keys ``year, name1, name2, score, sic1, sic2, size1, size2``.
        Pairs scoring below 0.001 are left out, except each firm's closest
        peer, which keeps every firm in every year's roster.
    """
    rng = np.random.default_rng(seed)
    firms = FIRMS + ([ENTRANT] if unbalanced else [])
    Z = tech_firm_paths(len(YEARS), unbalanced)
    n = len(firms)
    growth = 1.0 + 0.08 * rng.standard_normal((len(YEARS), n)).cumsum(axis=0) / np.sqrt(len(YEARS))
    sizes = np.array([f[4] for f in firms]) * np.exp(np.linspace(0, 1.2, len(YEARS)))[:, None] * growth
    rows = []
    for t, year in enumerate(YEARS):
        present = [i for i in range(n) if not (i == len(FIRMS) and year < ENTRY_YEAR)]
        d2 = np.sum((Z[t][:, None] - Z[t][None]) ** 2, axis=2)
        score = PEAK * np.exp(-d2 / (2 * BANDWIDTH ** 2) + NOISE * rng.standard_normal((n, n)))
        score = np.round(np.clip((score + score.T) / 2, 0.0, 1.0), DECIMALS)
        closest = {}
        for i in present:
            others = [j for j in present if j != i]
            closest[i] = others[int(np.argmin(d2[i, others]))]
        for a in present:
            for b in present:
                if b <= a:
                    continue
                s = score[a, b]
                if s < MIN_SCORE:
                    if closest[a] != b and closest[b] != a:
                        continue
                    s = MIN_SCORE
                rows.append({
                    "year": year,
                    "name1": firms[a][0],
                    "name2": firms[b][0],
                    "score": float(s),
                    "sic1": firms[a][1],
                    "sic2": firms[b][1],
                    "size1": round(float(sizes[t, a]), 2),
                    "size2": round(float(sizes[t, b]), 2),
                })
    return rows
