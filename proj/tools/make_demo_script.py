"""Builds the scripted answers for the demo catalog and the score table they must produce.

Usage: make_demo_script.py <toolrobust binary> [seed]

Writes data/demo/script.json (case id -> model output) and
tests/data/demo_expected.json (means, hallucinations, corrections, Welch ANOVA).
Expected values are computed here from the stage definitions, not by the binary.
"""
import json
import pathlib
import subprocess
import sys
import tempfile

from statsmodels.stats.oneway import anova_oneway

ROOT = pathlib.Path(__file__).resolve().parent.parent
LEVELS = ["clean", "slight", "medium", "heavy", "union"]
META = {"finish", "ask_to_user"}

# Outcome per case id. OK: gold call. CONTENT: one value wrong. PARAMS: parameter set wrong.
# WRONG: another listed tool. HALLUC: invented tool. CORRECTED: the pre-noise name of a renamed
# gold tool. PCORRECT: pre-noise parameter names. PARSE: no Action. ORIGINAL: the pre-noise
# gold name, which after an exchange belongs to another tool.
PLAN = {
    "c1": "OK", "c2": "OK", "c3": "CONTENT", "c4": "PARAMS", "c5": "OK", "c6": "WRONG",
    "c1@slight/tool": "OK", "c1@slight/parameter": "OK",
    "c2@slight/tool": "CORRECTED", "c2@slight/parameter": "PCORRECT",
    "c3@slight/tool": "OK", "c3@slight/parameter": "CONTENT",
    "c4@slight/tool": "HALLUC", "c4@slight/parameter": "OK",
    "c5@slight/tool": "OK", "c5@slight/parameter": "PARAMS",
    "c6@slight/tool": "CONTENT", "c6@slight/parameter": "PARSE",
    "c1@medium/tool": "OK", "c1@medium/parameter": "OK",
    "c2@medium/tool": "OK", "c2@medium/parameter": "OK",
    "c3@medium/tool": "WRONG", "c3@medium/parameter": "OK",
    "c4@medium/tool": "OK", "c4@medium/parameter": "CONTENT",
    "c5@medium/tool": "OK", "c5@medium/parameter": "OK",
    "c6@medium/tool": "HALLUC", "c6@medium/parameter": "OK",
    "c1@heavy/tool": "ORIGINAL", "c1@heavy/parameter": "OK",
    "c2@heavy/tool": "ORIGINAL", "c2@heavy/parameter": "PARAMS",
    "c3@heavy/tool": "OK", "c3@heavy/parameter": "OK",
    "c4@heavy/tool": "ORIGINAL", "c4@heavy/parameter": "CONTENT",
    "c5@heavy/tool": "OK", "c5@heavy/parameter": "OK",
    "c6@heavy/tool": "PARSE", "c6@heavy/parameter": "OK",
    "c1@union": "OK", "c2@union": "HALLUC", "c3@union": "OK",
    "c4@union": "PARAMS", "c5@union": "CONTENT", "c6@union": "OK",
}


def render(tool, args, thought="Let me call the tool."):
    return f"Thought: {thought}\nAction: {tool}\nAction Input: {json.dumps(args)}"


def original_gold_tool(case):
    renamed = case["mapping"]["tool_renames"]
    for original, new in renamed.items():
        if new == case["gold"]["tool"]:
            return original
    return case["gold"]["tool"]


def answer(case, outcome):
    gold = case["gold"]
    tools = [t["name"] for t in case["tools"]]
    args = dict(gold["contents"])
    if outcome == "OK":
        return gold["tool"], args
    if outcome == "CONTENT":
        first = sorted(args)[0]
        args[first] = args[first] + " (approx)"
        return gold["tool"], args
    if outcome == "PARAMS":
        if len(args) >= 2:
            args.pop(sorted(args)[-1])
        else:
            args["note"] = "extra"
        return gold["tool"], args
    if outcome == "WRONG":
        return next(t for t in tools if t != gold["tool"]), args
    if outcome == "HALLUC":
        return "made_up_tool", args
    if outcome in ("CORRECTED", "ORIGINAL"):
        original = original_gold_tool(case)
        assert original != gold["tool"], case["id"]
        assert (original in tools) == (outcome == "ORIGINAL"), case["id"]
        return original, args
    if outcome == "PCORRECT":
        base_tool = original_gold_tool(case)
        back = {new: old for old, new in case["mapping"]["param_renames"].get(base_tool, {}).items()}
        assert any(k in back for k in args), case["id"]
        return gold["tool"], {back.get(k, k): v for k, v in args.items()}
    raise ValueError(outcome)


def score(case, tool, args):
    gold = case["gold"]
    ts = int(tool == gold["tool"])
    pi = int(ts and set(args) == set(gold["parameters"]))
    cf = int(pi and all(args[p].strip() == gold["contents"][p].strip() for p in gold["parameters"]))
    return ts, pi, cf


def main():
    binary = sys.argv[1]
    seed = sys.argv[2] if len(sys.argv) > 2 else "7"
    with tempfile.TemporaryDirectory() as out:
        subprocess.run([binary, "generate", "--catalog", str(ROOT / "data/demo/catalog.json"), "--seed", seed,
                        "--out", out], check=True, capture_output=True)
        envs = {lvl: json.loads(pathlib.Path(out, f"env_{lvl}.json").read_text()) for lvl in LEVELS}

    script = {}
    scores = {lvl: [] for lvl in LEVELS}
    by_scenario = {}
    halluc = {lvl: 0 for lvl in LEVELS}
    corrections = {lvl: {"tool": 0, "parameter": 0} for lvl in LEVELS}
    for lvl in LEVELS:
        for case in envs[lvl]["cases"]:
            outcome = PLAN[case["id"]]
            if outcome == "PARSE":
                script[case["id"]] = "I am not sure which tool fits this request."
                s = (0, 0, 0)
            else:
                tool, args = answer(case, outcome)
                script[case["id"]] = render(tool, args)
                s = score(case, tool, args)
                names = [t["name"] for t in case["tools"]]
                if tool not in names and tool not in META:
                    halluc[lvl] += 1
                    if tool in case["mapping"]["tool_renames"]:
                        corrections[lvl]["tool"] += 1
                if outcome == "PCORRECT":
                    corrections[lvl]["parameter"] += 1
            scores[lvl].append(s)
            by_scenario.setdefault(case["scenario"], {}).setdefault(lvl, []).append(s)

    def means(rows):
        return {st: round(100.0 * sum(r[i] for r in rows) / len(rows), 2) for i, st in enumerate(["ts", "pi", "cf"])}

    groups = [[float(r[2]) for r in scores[lvl]] for lvl in LEVELS]
    res = anova_oneway(groups, use_var="unequal", welch_correction=True)
    expected = {
        "seed": int(seed),
        "means": {lvl: means(scores[lvl]) for lvl in LEVELS},
        "scenario_means": {sc: {lvl: means(rows) for lvl, rows in per.items()} for sc, per in by_scenario.items()},
        "hallucinations": dict(halluc, total=sum(halluc.values())),
        "noise_corrections": corrections,
        "anova": {"stage": "cf", "f": float(res.statistic), "p": float(res.pvalue),
                  "df1": float(res.df[0]), "df2": float(res.df[1])},
    }
    (ROOT / "data/demo/script.json").write_text(json.dumps(script, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    (ROOT / "tests/data/demo_expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")
    print(json.dumps(expected["means"], indent=1))
    print(expected["hallucinations"], expected["anova"])


if __name__ == "__main__":
    main()
