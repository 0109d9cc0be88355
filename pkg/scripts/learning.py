"""Train and evaluate every localization and counting model over the configured seeds."""

import logging

from _common import parser, save, setup

from azil.pipeline import ALL_MODELS, learning_study

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--models", default=",".join(ALL_MODELS))
    args = p.parse_args()
    cfg = setup(args)
    res = learning_study(cfg, models=args.models.split(","), progress=logging.info)
    for name, stats in res["summary"].items():
        logging.info("%-15s %s", name, {k: round(v["mean"], 3) for k, v in stats.items()})
    save(res, args.out, "learning")
