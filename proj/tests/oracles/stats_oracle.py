"""Reference values for the statistics tests.

Computed with scipy, statsmodels and pingouin and frozen into
tests/golden/stats_oracle.json. Re-run only to regenerate that file:

    python3 tests/oracles/stats_oracle.py > tests/golden/stats_oracle.json
"""

import json
import sys

import numpy as np
import pandas as pd
import pingouin as pg
import scipy
import statsmodels
from scipy import stats
from statsmodels.stats.anova import AnovaRM


def long_form(data):
    rows = []
    for s, subj in enumerate(data):
        for a, row in enumerate(subj):
            for b, v in enumerate(row):
                rows.append({"subject": s, "A": a, "B": b, "y": v})
    return pd.DataFrame(rows)


def rm_anova_case(name, data):
    df = long_form(data)
    fit = AnovaRM(df, "y", "subject", within=["A", "B"]).fit().anova_table
    pg_tab = pg.rm_anova(df, dv="y", within=["A", "B"], subject="subject", correction=True, effsize="np2")
    pg_tab = pg_tab.set_index("Source")
    effects = {}
    for key, sm_key, pg_key in (("A", "A", "A"), ("B", "B", "B"), ("AB", "A:B", "A * B")):
        F = float(fit.loc[sm_key, "F Value"])
        d1 = float(fit.loc[sm_key, "Num DF"])
        d2 = float(fit.loc[sm_key, "Den DF"])
        p = float(fit.loc[sm_key, "Pr > F"])
        np2 = F * d1 / (F * d1 + d2)
        assert abs(np2 - float(pg_tab.loc[pg_key, "np2"])) < 1e-9
        assert abs(F - float(pg_tab.loc[pg_key, "F"])) < 1e-9
        eps = float(pg_tab.loc[pg_key, "eps"])
        p_gg = float(stats.f.sf(F, d1 * eps, d2 * eps))
        if "p-GG-corr" in pg_tab.columns and not np.isnan(pg_tab.loc[pg_key, "p-GG-corr"]):
            assert abs(p_gg - float(pg_tab.loc[pg_key, "p-GG-corr"])) < 1e-9
        effects[key] = {"F": F, "df1": d1, "df2": d2, "p": p, "np2": np2, "gg_epsilon": eps, "p_gg": p_gg}

    # Mauchly on factor A (marginal over B) and on the A x B interaction
    marg = df.groupby(["subject", "A"], as_index=False)["y"].mean()
    sA = pg.sphericity(marg, dv="y", within="A", subject="subject")
    sAB = pg.sphericity(df, dv="y", within=["A", "B"], subject="subject")
    mauchly = {
        "A": {"W": float(sA.W), "chi2": float(sA.chi2), "df": int(sA.dof), "p": float(sA.pval)},
        "AB": {"W": float(sAB.W), "chi2": float(sAB.chi2), "df": int(sAB.dof), "p": float(sAB.pval)},
    }

    # Bonferroni over paired t-tests on the A marginals
    arr = np.asarray(data, dtype=float).mean(axis=2)
    pairs = []
    for i in range(arr.shape[1]):
        for j in range(i + 1, arr.shape[1]):
            r = stats.ttest_rel(arr[:, i], arr[:, j])
            pairs.append({"i": i, "j": j, "t": float(r.statistic), "p": float(r.pvalue),
                          "p_bonferroni": float(min(1.0, 3 * r.pvalue))})

    y = np.asarray(data, dtype=float)
    ss_total = float(((y - y.mean()) ** 2).sum())
    return {"name": name, "data": data, "effects": effects, "mauchly": mauchly, "pairwise_A": pairs,
            "ss_total": ss_total}


def unpaired_case(name, x, y):
    out = {"name": name, "x": x, "y": y}
    for key, equal in (("pooled", True), ("welch", False)):
        r = stats.ttest_ind(x, y, equal_var=equal)
        out[key] = {"t": float(r.statistic), "df": float(r.df), "p": float(r.pvalue)}
    return out


def wilcoxon_case(name, x, y):
    r = stats.wilcoxon(x, y, zero_method="wilcox", correction=False, method="approx")
    d = np.asarray(x, float) - np.asarray(y, float)
    d = d[d != 0]
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    n = len(d)
    # scipy reports z for min(W+, W-); re-sign it for W+
    z = abs(float(r.zstatistic)) * (1.0 if w_plus > n * (n + 1) / 4 else -1.0)
    return {"name": name, "x": x, "y": y, "W_plus": w_plus, "n": n, "Z": z, "p": float(r.pvalue)}


def main():
    rng = np.random.default_rng(20240917)
    anova = []
    # 12 participants x 3 sizes x 2 opacities, rate-like values
    base = rng.normal(40, 12, size=(12, 1, 1))
    eff = np.array([[-6.0, -8.0], [9.0, 5.0], [-3.0, -4.0]])
    d1 = np.clip(base + eff + rng.normal(0, 9, size=(12, 3, 2)), 0, 100).round(1)
    anova.append(rm_anova_case("rates-12", d1.tolist()))
    # small integer dataset
    d2 = [[[3, 4], [5, 7], [4, 4]], [[2, 2], [6, 5], [3, 5]], [[4, 5], [7, 9], [5, 4]],
          [[3, 3], [5, 6], [2, 3]], [[5, 6], [8, 7], [6, 6]], [[1, 3], [4, 6], [3, 2]]]
    anova.append(rm_anova_case("integers-6", d2))
    # heterogeneous variances across A levels: sphericity strained
    d3 = rng.normal(0, 1, size=(8, 3, 2)) * np.array([1.0, 4.0, 0.5])[None, :, None]
    d3 += np.array([[0.0, 0.5], [1.5, 1.0], [0.2, 0.1]])
    anova.append(rm_anova_case("heteroscedastic-8", d3.round(3).tolist()))

    unpaired = [
        unpaired_case("rates", [33.1, 28.0, 45.5, 12.0, 60.2, 21.7, 38.8, 29.9],
                      [49.9, 55.0, 38.2, 61.0, 47.3, 33.3, 58.8, 52.1]),
        unpaired_case("unequal-n", rng.normal(10, 2, 7).round(3).tolist(), rng.normal(12, 5, 11).round(3).tolist()),
        unpaired_case("small", [1.0, 2.0, 4.0], [2.0, 6.0, 7.0, 9.0]),
    ]

    wilcoxon = [
        wilcoxon_case("likert-8", [5, 6, 4, 6, 7, 5, 6, 5], [3, 4, 4, 5, 4, 3, 5, 2]),
        wilcoxon_case("ties-12", [4, 5, 5, 6, 3, 4, 6, 7, 5, 4, 5, 6], [3, 3, 5, 4, 3, 2, 4, 5, 3, 4, 2, 4]),
        wilcoxon_case("mixed-10", rng.normal(0, 1, 10).round(2).tolist(), rng.normal(0.6, 1, 10).round(2).tolist()),
    ]

    json.dump({"generator": {"scipy": scipy.__version__, "statsmodels": statsmodels.__version__,
                             "pingouin": pg.__version__},
               "rm_anova": anova, "unpaired_t": unpaired, "wilcoxon": wilcoxon},
              sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
