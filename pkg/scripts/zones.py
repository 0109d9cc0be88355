"""HALo under 3, 6 and 8 zone discretizations."""

import logging

from _common import parser, save, setup

from azil.pipeline import zones_ablation

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--presets", default="3,6,8")
    args = p.parse_args()
    cfg = setup(args)
    res = zones_ablation(cfg, args.presets.split(","), progress=logging.info)
    for row in res["rows"]:
        logging.info("%d zones seed %d: macro-F1 %.3f (rule %.3f)", row["n_zones"], row["seed"], row["macro_f1"],
                     row["rule_macro_f1"])
    save(res, args.out, "zones")
