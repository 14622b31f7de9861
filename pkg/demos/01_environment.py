"""Walk through one rearrangement episode step by step.

A leader picks objects in random order; an assistant proposes a location for
each pick; the leader's correction decides where the object actually goes.
"""

from blrhac import EnvironmentSpec, run_episode, vacant_locations

spec = EnvironmentSpec.preset("small")
print(f"env: {spec.name} ({spec.num_objects} objects, {spec.num_locations} locations)")


def lazy_assistant(a_h, vacant):
    # always proposes the lowest-numbered vacant location
    return vacant[0]


def tidy_leader(a_h, vacant):
    # wants object o at location o when possible, otherwise the highest slot
    return a_h if a_h in vacant else vacant[-1]


episode = run_episode(spec, seed=42, robot_policy=lazy_assistant, corrector=tidy_leader)

for step in episode.steps:
    verdict = "accepted" if step.a_r == step.a_c else f"corrected to l{step.a_c}"
    print(f"turn {step.state_after.turn_index}: picked o{step.a_h}, "
          f"assistant proposed l{step.a_r}, {verdict}")

final = episode.steps[-1].state_after
print("final placement:", {f"o{o}": f"l{l}" for o, l in sorted(final.placement.items())})
assert vacant_locations(final) == []
