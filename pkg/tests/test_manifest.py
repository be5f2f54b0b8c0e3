import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofbench.manifest import (
    ManifestEntry,
    ManifestError,
    MixRecipe,
    StratumError,
    mix,
    parse_manifest,
    serialize_manifest,
    parse_recipe,
    serialize_recipe,
    stratified_sample,
)
from conftest import make_pool

HEADER = "trial_id\taudio_path\tlabel\tattack_id\tsource\taugmentation\n"


def test_parse_two_rows_round_trip():
    text = (
        HEADER
        + "t1\ta/t1.wav\tbonafide\t-\tASV5\tnone\n"
        + "t2\ta/t2.wav\tspoof\tA01\tASV19\tnoise\n"
    )
    entries = parse_manifest(text)
    assert len(entries) == 2
    assert entries[0] == ManifestEntry("t1", "a/t1.wav", "bonafide", "-", "ASV5", "none")
    assert entries[1].attack_id == "A01"
    assert serialize_manifest(entries) == text


def test_parse_rejects_bad_label_with_line_number():
    text = HEADER + "t1\ta.wav\tbona_fide\t-\tASV5\tnone\n"
    with pytest.raises(ManifestError) as err:
        parse_manifest(text)
    assert err.value.line == 2


def test_parse_header_only_gives_empty_list():
    assert parse_manifest(HEADER) == []


def test_parse_rejects_duplicate_trial_id():
    text = HEADER + "t1\ta.wav\tspoof\tA01\tASV5\tnone\n" * 2
    with pytest.raises(ManifestError, match="t1"):
        parse_manifest(text)


def test_bonafide_requires_dash_attack():
    with pytest.raises(ManifestError):
        ManifestEntry("t", "a.wav", "bonafide", "A01", "ASV5")


@given(
    n_bona=st.integers(0, 20),
    n_spoof=st.integers(0, 60),
    n_attacks=st.integers(1, 4),
)
@settings(max_examples=50, deadline=None)
def test_round_trip_property(n_bona, n_spoof, n_attacks):
    attacks = tuple(f"A{k:02d}" for k in range(1, n_attacks + 1))
    entries = make_pool(n_bona, n_spoof, attacks)
    assert parse_manifest(serialize_manifest(entries)) == entries


class TestStratifiedSample:
    def test_medium_27k_ratio(self):
        attacks = tuple(f"A{k:02d}" for k in range(1, 9))
        pool = make_pool(4000, 32000, attacks)
        out = stratified_sample(pool, 27000, 8, seed=3)
        assert len(out) == 27000
        bona = [e for e in out if e.label == "bonafide"]
        assert len(bona) == 3000
        per_attack = {}
        for e in out:
            if e.label == "spoof":
                per_attack[e.attack_id] = per_attack.get(e.attack_id, 0) + 1
        assert all(v == 3000 for v in per_attack.values())

    def test_smallest_exact_case(self):
        pool = make_pool(2, 10)
        out = stratified_sample(pool, 9, 8, seed=0)
        assert sum(e.label == "bonafide" for e in out) == 1
        assert sum(e.label == "spoof" for e in out) == 8

    def test_determinism_and_seed_sensitivity(self):
        pool = make_pool(50, 400, ("A01", "A02"))
        a = stratified_sample(pool, 90, 8, seed=11)
        b = stratified_sample(pool, 90, 8, seed=11)
        c = stratified_sample(pool, 90, 8, seed=12)
        assert serialize_manifest(a) == serialize_manifest(b)
        assert serialize_manifest(a) != serialize_manifest(c)

    def test_insufficient_stratum_names_it(self):
        pool = make_pool(1, 100, ("A01",))
        with pytest.raises(StratumError, match="bonafide"):
            stratified_sample(pool, 18, 8, seed=0)

    def test_remainder_round_robin(self):
        # 10 spoof over 3 attacks: quotas 4,3,3 in lexical attack order
        pool = make_pool(5, 30, ("A01", "A02", "A03"))
        out = stratified_sample(pool, 11, 10, seed=0)
        counts = {}
        for e in out:
            if e.label == "spoof":
                counts[e.attack_id] = counts.get(e.attack_id, 0) + 1
        assert counts == {"A01": 4, "A02": 3, "A03": 3}

    @given(total=st.integers(9, 200), ratio=st.integers(1, 10), seed=st.integers(0, 5))
    @settings(max_examples=40, deadline=None)
    def test_ratio_within_one(self, total, ratio, seed):
        pool = make_pool(250, 2500, ("A01", "A02", "A03"))
        out = stratified_sample(pool, total, ratio, seed)
        assert len(out) == total
        bona = sum(e.label == "bonafide" for e in out)
        spoof = total - bona
        if bona:
            assert abs(spoof - ratio * bona) <= ratio  # floor rounding, <=1 sample off



class TestMix:
    def test_augm_31k_counts(self):
        pools = {
            "ASV5": make_pool(2000, 12000, prefix="a5"),
            "ASV19": make_pool(1000, 6000, prefix="a19", source="ASV19"),
            "ASV21": make_pool(1000, 8000, prefix="a21", source="ASV21"),
            "ITW": make_pool(1000, 1000, prefix="itw", source="ITW"),
            "FoR": make_pool(1000, 1000, prefix="for", source="FoR"),
        }
        recipe = MixRecipe(
            {"ASV5": 13000, "ASV19": 6100, "ASV21": 8600, "ITW": 1600, "FoR": 1800}, seed=5
        )
        out = mix(recipe, pools)
        assert len(out) == 31100
        by_source = {}
        for e in out:
            by_source[e.source] = by_source.get(e.source, 0) + 1
        assert by_source == recipe.counts

    def test_single_source_identity(self):
        pool = make_pool(2, 3)
        out = mix(MixRecipe({"ASV5": 5}, seed=1), {"ASV5": pool})
        assert sorted(e.trial_id for e in out) == sorted(e.trial_id for e in pool)

    def test_underflow_names_source_and_shortfall(self):
        with pytest.raises(StratumError) as err:
            mix(MixRecipe({"ASV19": 10}, seed=0), {"ASV19": make_pool(2, 2, source="ASV19")})
        assert err.value.stratum == "ASV19"
        assert err.value.requested == 10
        assert err.value.available == 4

    def test_id_collision_gets_source_prefix(self):
        p1 = make_pool(1, 0, source="ASV5")
        p2 = make_pool(1, 0, source="FoR")  # same trial_id "bona0"
        out = mix(MixRecipe({"ASV5": 1, "FoR": 1}, seed=0), {"ASV5": p1, "FoR": p2})
        ids = sorted(e.trial_id for e in out)
        assert len(set(ids)) == 2
        assert "FoR:bona0" in ids

    def test_output_length_equals_recipe_total(self):
        pools = {"ASV5": make_pool(50, 50), "ITW": make_pool(30, 30, source="ITW")}
        recipe = MixRecipe({"ASV5": 40, "ITW": 25}, seed=2)
        assert len(mix(recipe, pools)) == recipe.total


def test_recipe_round_trip():
    recipe = MixRecipe({"ASV5": 13000, "FoR": 1800}, ratio=8.0, seed=42)
    assert parse_recipe(serialize_recipe(recipe)) == recipe


def test_recipe_grammar_comments_and_errors():
    recipe = parse_recipe("# comment\nASV5.count = 3\nseed = 9\n")
    assert recipe.counts == {"ASV5": 3}
    assert recipe.seed == 9
    with pytest.raises(ValueError, match="unknown key"):
        parse_recipe("bogus = 1\n")


def test_recipe_validation():
    with pytest.raises(ValueError):
        MixRecipe({})
    with pytest.raises(ValueError):
        MixRecipe({"ASV5": -1})
    with pytest.raises(ValueError):
        MixRecipe({"ASV5": 0})
