#!/usr/bin/env python3
"""Regenerates the bundled synthetic market dataset.

Fifteen days of 5-minute data starting 2020-09-01T00:00:00Z:

  prices.csv     real-time price forecasts with a daily trough-peak-trough
                 shape (cheap overnight, morning bump, evening peak) and an
                 occasional evening spike every third day
  load.csv       community maximum load, mild daily swing around 10 MWh
  renewable.csv  mean-reverting renewable output in [0, 6] MWh

The series are seeded, so re-running this script reproduces the committed
CSV files byte for byte.
"""
import numpy as np

STAGES_PER_DAY = 288  # 5-minute stages
DAYS = 15
START = np.datetime64("2020-09-01T00:00:00")


def build(seed=20200901):
    rng = np.random.default_rng(seed)
    n = DAYS * STAGES_PER_DAY
    price = np.zeros(n)
    load = np.zeros(n)
    renewable = np.zeros(n)
    x = 2.0
    for t in range(n):
        tod = (t % STAGES_PER_DAY) / STAGES_PER_DAY
        day = t // STAGES_PER_DAY
        base = (16.0
                + 10.0 * np.exp(-((tod - 0.30) / 0.09) ** 2)   # morning bump
                + 26.0 * np.exp(-((tod - 0.70) / 0.10) ** 2)   # evening peak
                - 4.0 * np.exp(-((tod - 0.02) / 0.06) ** 2)    # overnight trough
                - 4.0 * np.exp(-((tod - 0.98) / 0.06) ** 2))
        vol = 0.8 + 2.2 * np.exp(-((tod - 0.70) / 0.12) ** 2)
        spike = 15.0 if (0.68 < tod < 0.74 and day % 3 == 1) else 0.0
        price[t] = max(1.0, base + spike + vol * rng.standard_normal())
        load[t] = 10.0 + 2.0 * np.sin(2 * np.pi * (tod - 0.3)) + 0.3 * rng.standard_normal()
        x = np.clip(0.965 * x + 0.35 * rng.standard_normal() + 0.07, 0.0, 6.0)
        renewable[t] = x
    return price, load, renewable


def write_csv(path, header, values):
    with open(path, "w") as f:
        f.write("timestamp,%s\n" % header)
        for t, v in enumerate(values):
            ts = START + np.timedelta64(5 * t, "m")
            f.write("%sZ,%.6f\n" % (ts, v))


if __name__ == "__main__":
    price, load, renewable = build()
    write_csv("prices.csv", "price_usd_per_mwh", price)
    write_csv("load.csv", "max_load_mwh", load)
    write_csv("renewable.csv", "re_mwh", renewable)
    print("wrote %d rows per file" % len(price))
