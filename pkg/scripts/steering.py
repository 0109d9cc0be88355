"""Delay-and-sum steering from zones versus audio DoA estimators over input SNR."""

import logging

from _common import parser, save, setup

from azil.pipeline import steering_study

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--snrs", default="20,0,-10,-15,-20,-25,-30")
    args = p.parse_args()
    cfg = setup(args)
    res = steering_study(cfg.data_seed, [float(s) for s in args.snrs.split(",")], args.trials, cfg.bins)
    for row in res["rows"]:
        logging.info("%6.1f dB %-9s gain %6.2f dB, doa error %6.2f deg", row["input_snr_db"], row["method"],
                     row["snr_gain_db"], row["doa_error_mean"])
    save(res, args.out, "steering")
