"""Voice-activity threshold sweep of the clustering partner counter."""

import logging

from _common import parser, save, setup

from azil.pipeline import threshold_sweep

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--thresholds", default="2,4,6,8,10,12,14", help="seconds")
    args = p.parse_args()
    cfg = setup(args)
    res = threshold_sweep(cfg, [float(t) for t in args.thresholds.split(",")])
    for row in res["rows"]:
        logging.info("%s", row)
    save(res, args.out, "threshold")
