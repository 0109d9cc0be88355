"""Bland-Altman agreement of IMU azimuth with the truth under injected gyro bias."""

import logging

from _common import parser, save, setup

from azil.pipeline import drift_study

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--sessions", type=int, default=150)
    p.add_argument("--biases", default="0,0.5,1,2", help="mrad/s")
    args = p.parse_args()
    cfg = setup(args)
    biases = [float(b) * 1e-3 for b in args.biases.split(",")]
    res = drift_study(cfg, biases, args.sessions, cfg.data_seed)
    for row in res["rows"]:
        logging.info("bias %.1f mrad/s: mae %.3f, loa [%.2f, %.2f], within %.1f%%", row["bias_mrad_s"], row["mae"],
                     row["loa_low"], row["loa_high"], row["pct_within"])
    save(res, args.out, "drift")
