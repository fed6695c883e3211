import pytest
from hypothesis import given, strategies as st

from flowcluster.errors import IdCollisionError, InvalidMatchError
from flowcluster.model import (
    FlowEntry,
    GroupTable,
    MatchFields,
    Packet,
    canonical_match_bytes,
    derive_flow_id,
    extract_context_key,
    install_entry,
    match_packet,
    update_statistics,
)

from oracles import ref_digest64, ref_match_bytes

# values frozen from the independent reference implementation
FROZEN_FLOW_IDS = {
    ("temp-high", 7, None): 0xAE74F8B567673AA5,
    ("temp-high", 7, 42): 0xE0A4B57E80A136FF,
    ("temp-low", 7, None): 0x4B15B8F246B91A98,
    ("humidity", 1, None): 0x71182AEF7B441D7D,
    ("temp-high", 1, None): 0x97B4E6889673A531,
}

labels = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=24
).filter(lambda s: s.strip())
ports = st.integers(min_value=0, max_value=65535)
sources = st.one_of(st.none(), st.integers(min_value=0, max_value=(1 << 64) - 1))
matches = st.builds(MatchFields, context_label=labels, port=ports, source=sources)


def pkt(match, seq=0, size=512, created=0.0, sender=1):
    return Packet(seq=seq, match=match, size_bytes=size, created_at=created, sender=sender)


class TestDeriveFlowId:
    def test_frozen_reference_values(self):
        for (label, port, source), expected in FROZEN_FLOW_IDS.items():
            assert derive_flow_id(MatchFields(label, port, source)) == expected

    def test_identical_matches_agree(self):
        a = MatchFields("temp-high", 7, None)
        b = MatchFields("temp-high", 7, None)
        assert derive_flow_id(a) == derive_flow_id(b)

    def test_distinct_labels_distinct_ids(self):
        high = derive_flow_id(MatchFields("temp-high", 7, None))
        low = derive_flow_id(MatchFields("temp-low", 7, None))
        assert high != low

    def test_empty_label_rejected(self):
        with pytest.raises(InvalidMatchError):
            derive_flow_id(MatchFields("", 1, None))

    @given(matches)
    def test_agrees_with_reference_digest(self, match):
        expected = ref_digest64(ref_match_bytes(match.context_label, match.port, match.source))
        assert derive_flow_id(match) == expected
        assert canonical_match_bytes(match) == ref_match_bytes(
            match.context_label, match.port, match.source
        )

    @given(matches)
    def test_pure_function(self, match):
        assert derive_flow_id(match) == derive_flow_id(match)


class TestContextKey:
    def test_normalizes_case_and_whitespace(self):
        assert extract_context_key(MatchFields("Temp-High ", 1, None)) == "temp-high"

    def test_location_agnostic(self):
        in_net1 = MatchFields("humidity", 1, 11)
        in_net2 = MatchFields("humidity", 1, 22)
        assert extract_context_key(in_net1) == extract_context_key(in_net2)

    def test_distinct_labels_distinct_keys(self):
        assert extract_context_key(MatchFields("humidity", 1)) != extract_context_key(
            MatchFields("temp-high", 1)
        )

    def test_whitespace_only_rejected(self):
        with pytest.raises(InvalidMatchError):
            extract_context_key(MatchFields("   ", 1, None))

    @given(matches)
    def test_idempotent(self, match):
        key = extract_context_key(match)
        assert extract_context_key(MatchFields(key, match.port, match.source)) == key


class TestMatchPacket:
    def test_empty_table_misses(self):
        assert match_packet([], pkt(MatchFields("a", 1))) is None

    def test_hit_on_equal_match(self):
        table = []
        entry = install_entry(table, MatchFields("a", 1))
        assert match_packet(table, pkt(MatchFields("a", 1))) is entry

    def test_first_match_wins_order(self):
        table = []
        install_entry(table, MatchFields("a", 1))
        entry_b = install_entry(table, MatchFields("b", 1))
        assert match_packet(table, pkt(MatchFields("b", 1))) is entry_b

    @given(st.lists(matches, max_size=8), matches)
    def test_matches_linear_scan_oracle(self, table_matches, probe):
        table = [FlowEntry(m, derive_flow_id(m)) for m in table_matches]
        got = match_packet(table, pkt(probe))
        expected = None
        for entry in table:  # independent scan, first match wins
            if entry.match == probe:
                expected = entry
                break
        assert got is expected


class TestUpdateStatistics:
    def test_same_match_twice_consistent(self):
        table = []
        entry = install_entry(table, MatchFields("a", 1))
        assert update_statistics(entry, pkt(MatchFields("a", 1))) is True
        assert update_statistics(entry, pkt(MatchFields("a", 1))) is True
        assert entry.stats.packet_count == 2

    def test_label_change_is_mismatch(self):
        table = []
        entry = install_entry(table, MatchFields("temp-high", 1))
        update_statistics(entry, pkt(MatchFields("temp-high", 1)))
        assert update_statistics(entry, pkt(MatchFields("temp-low", 1))) is False

    def test_counters_over_full_run(self):
        table = []
        entry = install_entry(table, MatchFields("a", 1))
        for seq in range(2000):
            update_statistics(entry, pkt(MatchFields("a", 1), seq=seq))
        assert entry.stats.packet_count == 2000
        assert entry.stats.byte_count == 2000 * 512

    @given(st.lists(st.integers(min_value=1, max_value=4096), min_size=1, max_size=50))
    def test_byte_count_is_sum_of_sizes(self, sizes):
        entry = FlowEntry(MatchFields("a", 1), derive_flow_id(MatchFields("a", 1)))
        for seq, size in enumerate(sizes):
            update_statistics(entry, pkt(MatchFields("a", 1), seq=seq, size=size))
        assert entry.stats.byte_count == sum(sizes)
        assert entry.stats.packet_count == len(sizes)


class TestInstallEntry:
    def test_collision_is_fatal(self):
        table = []
        entry = install_entry(table, MatchFields("a", 1))
        # forge an entry whose id equals the derived id of a different match
        forged = FlowEntry(MatchFields("b", 2), derive_flow_id(MatchFields("c", 3)))
        table.append(forged)
        with pytest.raises(IdCollisionError):
            install_entry(table, MatchFields("c", 3))
        assert entry in table


class TestPacket:
    def test_size_must_be_positive(self):
        with pytest.raises(ValueError):
            Packet(0, MatchFields("a", 1), 0, 0.0, 1)

    def test_created_at_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            Packet(0, MatchFields("a", 1), 512, -1.0, 1)


class TestGroupTable:
    def test_add_and_members(self):
        table = GroupTable()
        table.add(10, 1)
        table.add(10, 2)
        assert table.members(10) == {1, 2}
        assert table.members(99) == frozenset()

    def test_remap_merges_groups(self):
        table = GroupTable()
        table.add(10, 1)
        table.add(20, 2)
        table.remap(20, 10)
        assert table.members(10) == {1, 2}
        assert 20 not in table
