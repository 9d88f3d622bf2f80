import numpy as np
import pytest

from cfx.plaf import (PlafError, action_cascade, cascade_batch, check_rules,
                      feasible_space, format_program, ground, parse_plaf,
                      satisfies_rules)
from cfx.schema import (CATEGORICAL, CONTINUOUS, ORDINAL, Dataset, Feature,
                        FeatureSchema, Instance)

PEOPLE_RULES = """\
GROUP education, income
PLAF x_cf.gender = x.gender
PLAF x_cf.age >= x.age
PLAF IF x_cf.education > x.education THEN x_cf.age > x.age + 4
"""


@pytest.fixture
def x22(people):
    return people.encode_instance(
        Instance(("female", 22, 1, 10_000)))


class TestParser:
    def test_reference_program(self, people_schema):
        p = parse_plaf(PEOPLE_RULES, people_schema)
        assert p.explicit_groups == [(2, 3)]
        assert len(p.rules) == 3
        # groups: {education, income} first, then singleton gender, age
        assert p.group_set.groups == ((2, 3), (0,), (1,))

    def test_dependency_edge_and_acyclicity(self, people_schema):
        p = parse_plaf(PEOPLE_RULES, people_schema)
        # the conditional rule defines age and mentions education:
        # education's group must precede age's group in rule order
        rule = p.rules[2]
        assert rule.defined_feature == people_schema.index("age")

    def test_two_rule_cycle_rejected(self, people_schema):
        text = ("PLAF IF x_cf.age > 1 THEN x_cf.education > 2\n"
                "PLAF IF x_cf.education > 1 THEN x_cf.age > 2\n")
        with pytest.raises(PlafError, match="[Cc]ycl"):
            parse_plaf(text, people_schema)

    def test_empty_text(self, people_schema):
        p = parse_plaf("", people_schema)
        assert p.rules == []
        # all-singleton groups
        assert len(p.group_set) == len(people_schema)

    def test_and_and_ampersand_are_interchangeable(self, people_schema):
        a = parse_plaf("PLAF IF x.age > 10 and x.income > 5 THEN x_cf.age >= 30",
                       people_schema)
        b = parse_plaf("PLAF IF x.age > 10 && x.income > 5 THEN x_cf.age >= 30",
                       people_schema)
        assert a.rules == b.rules

    def test_comments_and_blank_lines(self, people_schema):
        text = "# header comment\n\nPLAF x_cf.age >= x.age  # trailing\n"
        p = parse_plaf(text, people_schema)
        assert len(p.rules) == 1

    def test_false_consequent(self, people_schema):
        p = parse_plaf("PLAF IF x_cf.income > 90000 THEN false", people_schema)
        assert p.rules[0].defined_feature is None

    def test_syntax_error_carries_line_and_column(self, people_schema):
        with pytest.raises(PlafError) as ei:
            parse_plaf("PLAF x_cf.age >= >\n", people_schema)
        assert ei.value.line == 1 and ei.value.col > 0

    def test_unknown_feature(self, people_schema):
        with pytest.raises(PlafError, match="debt"):
            parse_plaf("PLAF x_cf.debt >= 1", people_schema)

    def test_overlapping_groups_rejected(self, people_schema):
        text = "GROUP education, income\nGROUP income, age\n"
        with pytest.raises(PlafError, match="more than one group"):
            parse_plaf(text, people_schema)

    def test_consequent_must_define_one_cf_feature(self, people_schema):
        with pytest.raises(PlafError, match="consequent"):
            parse_plaf("PLAF x.age >= 10", people_schema)

    def test_group_needs_two_features(self, people_schema):
        with pytest.raises(PlafError, match="at least two"):
            parse_plaf("GROUP education", people_schema)

    def test_lowercase_keywords_not_recognized(self, people_schema):
        with pytest.raises(PlafError):
            parse_plaf("plaf x_cf.age >= 1", people_schema)

    def test_categorical_arithmetic_rejected(self, people_schema):
        with pytest.raises(PlafError, match="categorical|numeric"):
            parse_plaf("PLAF x_cf.gender >= x.gender + 1", people_schema)

    def test_round_trip_structural_equality(self, people_schema):
        texts = [
            PEOPLE_RULES,
            "PLAF IF x_cf.income > 90000 THEN false",
            'PLAF x_cf.gender != "male"',
            "PLAF x_cf.income >= x.income * 2 - 500",
        ]
        for text in texts:
            p = parse_plaf(text, people_schema)
            again = parse_plaf(format_program(p), people_schema)
            assert again == p


class TestGround:
    def test_reference_grounding(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        cx = ground(x22, p, people)
        # gender group (index 1), age group (index 2)
        gender_atoms = cx.per_group[1]
        age_atoms = cx.per_group[2]
        assert len(gender_atoms) == 1 and len(age_atoms) == 1
        # education>1 => age>26 stays as a cross-group rule
        assert len(cx.cross_rules) == 1
        assert cx.has_cross_rules

    def test_constant_folding_to_26(self, people, x22):
        p = parse_plaf("PLAF IF x_cf.education > x.education THEN x_cf.age > x.age + 4",
                       people.schema)
        cx = ground(x22, p, people)
        rule = cx.cross_rules[0]
        # rhs of the consequent folded to the constant 26.0
        cons = rule.consequent
        vals = cons.evaluate(lambda f: np.array([27.0]))
        assert vals[0] == np.True_
        vals = cons.evaluate(lambda f: np.array([26.0]))
        assert vals[0] == np.False_

    def test_empty_antecedent_direct_substitution(self, people):
        x = people.encode_instance(Instance(("male", 40, 3, 50_000)))
        p = parse_plaf("PLAF x_cf.age >= x.age", people.schema)
        cx = ground(x, p, people)
        age_group = int(p.group_set.group_of[people.schema.index("age")])
        atom = cx.per_group[age_group][0]
        assert atom.evaluate(lambda f: np.array([40.0]))[0] == np.True_
        assert atom.evaluate(lambda f: np.array([39.0]))[0] == np.False_

    def test_antecedent_over_x_only_folds_away(self, people, x22):
        # x.age=22 -> antecedent true -> consequent promoted to unconditional
        p = parse_plaf("PLAF IF x.age < 30 THEN x_cf.income >= 20000", people.schema)
        cx = ground(x22, p, people)
        inc_group = int(p.group_set.group_of[people.schema.index("income")])
        assert len(cx.per_group[inc_group]) == 1
        # x.age=40 -> antecedent false -> rule vanishes
        x40 = people.encode_instance(Instance(("male", 40, 3, 50_000)))
        cx2 = ground(x40, p, people)
        assert all(len(g) == 0 for g in cx2.per_group)
        assert not cx2.cross_rules


class TestFeasibleSpace:
    def test_gender_filter(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        cx = ground(x22, p, people)
        ss = feasible_space(people, p.group_set, cx)
        gender_gi = int(p.group_set.group_of[people.schema.index("gender")])
        gs = ss.per_group[gender_gi]
        assert gs.size == 1  # only "female" survives
        assert people.decode_value(people.schema.index("gender"),
                                   gs.tuples[0, 0]) == "female"

    def test_age_filter_and_weights_are_frequencies(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        cx = ground(x22, p, people)
        ss = feasible_space(people, p.group_set, cx)
        age_gi = int(p.group_set.group_of[people.schema.index("age")])
        gs = ss.per_group[age_gi]
        assert (gs.tuples[:, 0] >= 22).all()
        vals, counts = people.active_domain(people.schema.index("age"))
        assert gs.size == int((vals >= 22).sum())
        assert gs.weights.tolist() == counts[vals >= 22].tolist()

    def test_education_income_group_unfiltered(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        cx = ground(x22, p, people)
        ss = feasible_space(people, p.group_set, cx)
        tuples, _ = people.joint_domain((2, 3))
        assert ss.per_group[0].size == tuples.shape[0]

    def test_cross_group_rule_does_not_filter(self, people, x22):
        bare = parse_plaf("", people.schema)
        ruled = parse_plaf(
            "PLAF IF x_cf.education > x.education THEN x_cf.age > x.age + 4",
            people.schema)
        ss_bare = feasible_space(people, bare.group_set, ground(x22, bare, people))
        ss_ruled = feasible_space(people, ruled.group_set, ground(x22, ruled, people))
        for a, b in zip(ss_bare.per_group, ss_ruled.per_group):
            assert a.size == b.size

    def test_tuples_satisfy_per_group_atoms_by_scan(self, people):
        x = people.encode_instance(Instance(("male", 30, 2, 15_000)))
        p = parse_plaf("PLAF x_cf.income >= x.income + 10000\n"
                       "PLAF x_cf.age >= x.age", people.schema)
        cx = ground(x, p, people)
        ss = feasible_space(people, p.group_set, cx)
        inc_gi = int(p.group_set.group_of[people.schema.index("income")])
        age_gi = int(p.group_set.group_of[people.schema.index("age")])
        assert (ss.per_group[inc_gi].tuples[:, 0] >= 25_000).all()
        assert (ss.per_group[age_gi].tuples[:, 0] >= 30).all()
        assert ss.per_group[inc_gi].size > 0

    def test_empty_space_permitted(self, people):
        x = people.encode_instance(Instance(("male", 60, 3, 100_000)))
        p = parse_plaf("PLAF x_cf.age > x.age", people.schema)  # 60 is the max
        cx = ground(x, p, people)
        ss = feasible_space(people, p.group_set, cx)
        age_gi = int(p.group_set.group_of[people.schema.index("age")])
        assert ss.per_group[age_gi].size == 0

    def test_dump_mentions_sizes(self, people, x22):
        p = parse_plaf("", people.schema)
        ss = feasible_space(people, p.group_set, ground(x22, p, people))
        text = ss.dump()
        assert "group 0" in text and "tuples" in text


class TestActionCascade:
    def _setup(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        cx = ground(x22, p, people)
        ss = feasible_space(people, p.group_set, cx)
        return p, cx, ss

    def test_violating_candidate_repaired(self, people, x22, rng):
        p, cx, ss = self._setup(people, x22)
        # bump education to 5 (>1) but leave age at 22 -> rule fires
        z = x22.copy()
        z[people.schema.index("education")] = 5.0
        z[people.schema.index("income")] = 80_000.0
        edu_gi = int(p.group_set.group_of[people.schema.index("education")])
        out = action_cascade(z, 1 << edu_gi, cx, ss, rng)
        assert out is not None
        repaired, bits = out
        age_i = people.schema.index("age")
        assert repaired[age_i] > 26.0
        age_gi = int(p.group_set.group_of[age_i])
        assert bits & (1 << age_gi)  # age group joined the change set

    def test_satisfied_candidate_unchanged(self, people, x22, rng):
        p, cx, ss = self._setup(people, x22)
        z = x22.copy()
        z[people.schema.index("income")] = 80_000.0
        inc_gi = int(p.group_set.group_of[people.schema.index("income")])
        out = action_cascade(z, 1 << inc_gi, cx, ss, rng)
        assert out is not None
        repaired, bits = out
        assert np.array_equal(repaired, z)
        assert bits == 1 << inc_gi

    def test_empty_restricted_space_discards(self, rng):
        schema = FeatureSchema([Feature("education", ORDINAL), Feature("age", ORDINAL)])
        d = Dataset.from_columns(schema, {"education": [1, 2, 3],
                                          "age": [20, 22, 25]})  # max age 25
        x = d.encode_instance(Instance((1, 20)))
        p = parse_plaf("PLAF IF x_cf.education > x.education THEN x_cf.age > x.age + 8",
                       schema)
        cx = ground(x, p, d)
        ss = feasible_space(d, p.group_set, cx)
        z = x.copy()
        z[0] = 3.0  # fires the rule; age must exceed 28 but the domain tops at 25
        edu_gi = int(p.group_set.group_of[0])
        assert action_cascade(z, 1 << edu_gi, cx, ss, rng) is None

    def test_cascade_outputs_pass_brute_force(self, people, x22, rng):
        p, cx, ss = self._setup(people, x22)
        edu_i = people.schema.index("education")
        inc_i = people.schema.index("income")
        edu_gi = int(p.group_set.group_of[edu_i])
        edu_income, _ = people.joint_domain((edu_i, inc_i))
        kept = 0
        for tup in edu_income:
            z = x22.copy()
            z[[edu_i, inc_i]] = tup
            out = action_cascade(z, 1 << edu_gi, cx, ss, rng)
            if out is None:
                continue
            kept += 1
            repaired, _ = out
            assert satisfies_rules(p, people, x22, repaired)
        assert kept > 0

    def test_batch_cascade_matches_row_semantics(self, people, x22, rng):
        p, cx, ss = self._setup(people, x22)
        edu_i = people.schema.index("education")
        inc_i = people.schema.index("income")
        edu_gi = int(p.group_set.group_of[edu_i])
        Z = np.tile(x22, (4, 1))
        Z[:, edu_i] = [5, 5, 1, 2]
        Z[:, inc_i] = [80_000, 90_000, 10_000, 15_000]
        bits = np.full(4, 1 << edu_gi, dtype=np.int64)
        keep = cascade_batch(Z, bits, cx, ss, rng)
        for r in range(4):
            if keep[r]:
                assert satisfies_rules(p, people, x22, Z[r])

    def test_forced_group_when_x_violates_its_own_filter(self, people):
        # x.income below a required floor: the income group must always change
        x = people.encode_instance(Instance(("male", 30, 2, 15_000)))
        p = parse_plaf("PLAF x_cf.income >= 20000", people.schema)
        cx = ground(x, p, people)
        inc_gi = int(p.group_set.group_of[people.schema.index("income")])
        assert inc_gi in cx.forced_groups


class TestCheckRules:
    def test_check_rules_per_rule_results(self, people, x22):
        p = parse_plaf(PEOPLE_RULES, people.schema)
        z = x22.copy()
        z[people.schema.index("education")] = 5.0
        # gender same (ok), age unchanged >= (ok), education rule violated
        assert check_rules(p, people, x22, z) == [True, True, False]

    def test_false_consequent_enforced_by_rejection(self, people, x22):
        p = parse_plaf("PLAF IF x_cf.income > 90000 THEN false", people.schema)
        z = x22.copy()
        z[people.schema.index("income")] = 100_000.0
        assert check_rules(p, people, x22, z) == [False]
        z[people.schema.index("income")] = 90_000.0
        assert check_rules(p, people, x22, z) == [True]


ADULT_PROGRAM = """\
PLAF x_cf.Age >= x.Age
PLAF x_cf.Education >= x.Education
PLAF x_cf.MaritalStatus = x.MaritalStatus
PLAF x_cf.Relationship = x.Relationship
PLAF x_cf.Gender = x.Gender
PLAF x_cf.NativeCountry = x.NativeCountry
PLAF IF x_cf.Education > x.Education THEN x_cf.Age >= x.Age + 4
"""


class TestRealPrograms:
    def test_adult_program_parses_and_grounds(self):
        from cfx.bench.workloads import adult_dataset, adult_program_text
        d = adult_dataset(rows=300, seed=3)
        p = parse_plaf(adult_program_text(), d.schema)
        assert len(p.rules) == 7
        x = d.matrix[0]
        cx = ground(x, p, d)
        ss = feasible_space(d, p.group_set, cx)
        assert len(ss.per_group) == len(p.group_set)

    def test_credit_program_parses_and_grounds(self):
        from cfx.bench.workloads import credit_dataset, credit_program_text
        d = credit_dataset(rows=300, seed=3)
        p = parse_plaf(credit_program_text(), d.schema)
        assert len(p.rules) == 9
        cx = ground(d.matrix[1], p, d)
        ss = feasible_space(d, p.group_set, cx)
        assert len(ss.per_group) == len(p.group_set)

    def test_adult_text_matches_reference_shape(self):
        from cfx.bench.workloads import adult_dataset, adult_program_text
        d = adult_dataset(rows=50, seed=3)
        ours = parse_plaf(adult_program_text(), d.schema)
        reference = parse_plaf(ADULT_PROGRAM, d.schema)
        assert ours == reference
