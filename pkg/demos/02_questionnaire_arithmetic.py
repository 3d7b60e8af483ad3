"""The numbers behind a report: SUS scoring, letter grades and SEQ bands.

    python3 demos/02_questionnaire_arithmetic.py
"""

from uxprobe.metrics import aggregate_seq, classify_step, compute_sus, grade_sus
from uxprobe.synthesis import likert5, rule_based_responses

# Ten SUS answers on a 1-5 scale. Odd items are worded positively, even
# items negatively, so "agree" is good on odd items and bad on even ones.
answers = [3, 3, 4, 2, 3, 3, 4, 4, 3, 3]
score = compute_sus(answers)
grade = grade_sus(score)
print(f"SUS answers {answers} -> {score}, grade {grade.grade}, percentile {grade.percentile_range}")

for s in (51.6, 51.7, 84.0, 84.1):
    print(f"  {s:>5} falls in grade {grade_sus(s).grade}")

# After every step the synthetic user rates ease from 1 to 7.
series = [7, 7, 7, 1, 2, 6, 7, 6, 1, 1, 1, 7, 6, 3]
summary = aggregate_seq(series)
print(f"\nSEQ series {series}")
print(f"  mean {summary.mean_exact} = {summary.to_dict()['mean_rounded']}, good experience: {summary.good_experience}")
print("  step classes:", " ".join(classify_step(s).value[0] for s in series), "(f=friction, n=neutral, s=success)")

# Without a model, SUS answers come from the session's mean ratings, mapped
# from the 7-point scale onto the 5-point one.
means = {"seq": 6.2, "efficiency": 5.0, "clarity": 3.1, "confidence": 6.8}
print(f"\nRule-based mapping of {means}:")
print("  5-point values:", {k: likert5(v) for k, v in means.items()})
responses = rule_based_responses(means)
print(f"  questionnaire {responses} -> SUS {compute_sus(responses)}")
