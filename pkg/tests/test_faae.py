"""Composed scheme tests: registry wiring, lockstep evolution, encrypt-then-MAC
discipline, verify-then-decrypt, storage model, cost contracts."""

import random

import pytest

import oracles
from diamond import faae, famac
from diamond import primitives as P
from diamond.errors import (AuthenticationError, ConfigurationError,
                            ExhaustedKeyMaterialError, StructuralError)
from diamond.faae import (AggMode, SchemeId, SecretMaterial, make_config,
                          offline_storage_bytes, scheme_registry_lookup)
from diamond.keychain import UpdateMechanism
from diamond.primitives import PrfAlgorithm, UhAlgorithm
from diamond.util import DeterministicRng

ALL_SCHEMES = ["diamond1", "diamond2", "graphene1", "graphene2", "faae1"]


def _setup(scheme, n, b, msg_len, agg=None, seed="setup", ctr=1 << 40):
    config = make_config(scheme, n=n, b=b, msg_len=msg_len, agg_mode=agg)
    material = SecretMaterial.generate(config, DeterministicRng(seed))
    sender = faae.keygen_from_material(config, material, ctr)
    receiver = faae.keygen_from_material(config, material, ctr)
    return config, material, sender, receiver


def _sign_epoch(config, state, messages, start=None):
    acc = None
    cts = []
    for msg in messages:
        pkt = faae.authenc_offline(state)
        ct, tag = faae.authenc_online(state, msg, pkt)
        cts.append(ct)
        acc = faae.agg(acc, tag, config.agg_mode, period=pkt.period,
                       epoch_size=config.b)
    return cts, acc


class TestRegistry:
    def test_scheme_rows(self):
        p1 = scheme_registry_lookup(SchemeId.DIAMOND1)
        assert p1.prf1.algorithm_id is PrfAlgorithm.AES128
        assert p1.uh.algorithm_id is UhAlgorithm.GHASH
        assert p1.key_update is UpdateMechanism.FPRG_AES
        assert p1.default_agg is AggMode.XOR

        p2 = scheme_registry_lookup(SchemeId.DIAMOND2)
        assert p2.prf1.algorithm_id is PrfAlgorithm.CHACHA20BLOCK
        assert p2.uh.algorithm_id is UhAlgorithm.POLY1305
        assert p2.uh.universality_eps == 2.0 ** -103
        assert p2.key_update is UpdateMechanism.FPRG_AES

        g1 = scheme_registry_lookup(SchemeId.GRAPHENE1)
        assert g1.prf1 == p1.prf1 and g1.uh == p1.uh
        assert g1.key_update is UpdateMechanism.HASH_SHA256

        g2 = scheme_registry_lookup(SchemeId.GRAPHENE2)
        assert g2.prf1.block_bits == 512  # stream-cipher state size
        assert g2.prf1.key_bits == 256

        f1 = scheme_registry_lookup(SchemeId.FAAE1)
        assert f1.integrated
        assert f1.key_update is UpdateMechanism.HASH_SHA256

    def test_wire_codes(self):
        assert int(SchemeId.DIAMOND1) == 0x01
        assert int(SchemeId.DIAMOND2) == 0x02
        assert int(SchemeId.GRAPHENE1) == 0x11
        assert int(SchemeId.GRAPHENE2) == 0x12
        assert int(SchemeId.FAAE1) == 0x21

    def test_unknown_id_rejected(self):
        with pytest.raises(ConfigurationError):
            scheme_registry_lookup(0x7F)
        with pytest.raises(ConfigurationError):
            SchemeId.from_name("diamond3")

    def test_faae1_single_message_equals_standard_gcm(self):
        # first-period output must be plain AES-128-GCM under K_1, nonce 1
        config, material, sender, _ = _setup("faae1", 4, 1, 32)
        msg = b"\x5c" * 32
        ct, tag = faae.authenc(sender, msg)
        from cryptography.hazmat.primitives.ciphers.aead import AESGCM
        blob = AESGCM(bytes(material.aead_key)).encrypt((1).to_bytes(12, "big"),
                                                        msg, None)
        assert ct + tag == blob


class TestKeygenUpdate:
    def test_lockstep_over_updates(self):
        _, _, state, _ = _setup("diamond1", 16, 4, 16)
        for k in range(15):
            faae.update(state)
            assert state.period == k + 2
            assert state.fse.period == state.famac.period

    def test_update_at_lifetime_end_aborts(self):
        _, _, state, _ = _setup("diamond1", 2, 1, 16)
        faae.update(state)
        with pytest.raises(ExhaustedKeyMaterialError):
            faae.update(state)

    def test_policy_divergence_from_identical_seeds(self):
        cfg_d = make_config("diamond1", n=4, b=1, msg_len=16)
        cfg_g = make_config("graphene1", n=4, b=1, msg_len=16)
        mat = SecretMaterial(fse_seed=bytearray(b"\x01" * 16),
                             prf_seed=bytearray(b"\x02" * 16),
                             uh_seed=bytearray(b"\x03" * 16))
        d = faae.keygen_from_material(cfg_d, mat, 0)
        g = faae.keygen_from_material(cfg_g, mat, 0)
        faae.update(d)
        faae.update(g)
        assert bytes(d.fse.current_key) != bytes(g.fse.current_key)

    def test_counter_mirror(self):
        _, _, state, _ = _setup("diamond1", 4, 1, 48, ctr=1000)
        assert state.ctr == 1000
        faae.update(state)
        assert state.ctr == 1003


class TestAuthEnc:
    def test_tag_authenticates_ciphertext_not_plaintext(self):
        config, material, sender, receiver = _setup("diamond1", 4, 4, 16)
        rnd = random.Random(40)
        msgs = [rnd.randbytes(16) for _ in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        assert cts != msgs
        # verifying the plaintexts under the same keys rejects
        ok, _ = famac.averify(receiver.famac, msgs, acc)
        assert not ok

    def test_ciphertext_tag_verify_against_famac_direct(self):
        config, material, sender, receiver = _setup("diamond2", 4, 4, 24)
        rnd = random.Random(41)
        msgs = [rnd.randbytes(24) for _ in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        ok, _ = famac.averify(receiver.famac, cts, acc)
        assert ok

    def test_online_phase_cost_contract(self):
        for scheme in ALL_SCHEMES:
            _, _, sender, _ = _setup(scheme, 4, 1, 64, seed=f"cost-{scheme}")
            pkt = faae.authenc_offline(sender)
            P.counters.reset()
            faae.authenc_online(sender, b"\x01" * 64, pkt)
            assert P.counters.prf_calls == 0, scheme
            assert P.counters.uh_calls == 1, scheme

    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    def test_pipeline_matches_immediate_mode(self, scheme):
        config, material, a, _ = _setup(scheme, 8, 4, 32, seed=f"pipe-{scheme}")
        b_state = faae.keygen_from_material(config, material, 1 << 40)
        rnd = random.Random(42)
        msgs = [rnd.randbytes(32) for _ in range(8)]
        out_a = [faae.authenc(a, m) for m in msgs]
        faae.precompute(b_state, 8)
        out_b = [faae.authenc_online(b_state, m) for m in msgs]
        assert out_a == out_b

    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    def test_single_phase_reference_equivalence(self, scheme):
        config, material, state, _ = _setup(scheme, 50, 5, 48, seed=f"ref-{scheme}")
        rnd = random.Random(43)
        msgs = [rnd.randbytes(48) for _ in range(50)]
        expect = oracles.single_phase_authenc(scheme, material, 1 << 40, msgs)
        faae.precompute(state, 50)
        got = [faae.authenc_online(state, m) for m in msgs]
        assert got == expect


class TestAVerDec:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    @pytest.mark.parametrize("b", [1, 4])
    def test_honest_roundtrip(self, scheme, b):
        config, _, sender, receiver = _setup(scheme, 2 * b, b, 32,
                                             seed=f"rt-{scheme}-{b}")
        rnd = random.Random(44)
        for _ in range(2):
            msgs = [rnd.randbytes(32) for _ in range(b)]
            cts, acc = _sign_epoch(config, sender, msgs)
            assert faae.averdec(receiver, cts, acc) == msgs

    def test_flipped_bit_rejects_and_releases_nothing(self):
        config, _, sender, receiver = _setup("diamond1", 4, 4, 16)
        msgs = [bytes([i]) * 16 for i in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        bad = [bytearray(c) for c in cts]
        bad[2][5] ^= 0x04
        with pytest.raises(AuthenticationError):
            faae.averdec(receiver, [bytes(c) for c in bad], acc)

    def test_reject_advances_state(self):
        config, _, sender, receiver = _setup("graphene2", 8, 4, 16)
        msgs = [bytes([i]) * 16 for i in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        wrong = famac.AggregateTag(acc.start, acc.end, acc.mode,
                                   bytes(len(acc.value)))
        with pytest.raises(AuthenticationError):
            faae.averdec(receiver, cts, wrong)
        assert receiver.period == 5
        msgs2 = [bytes([i + 4]) * 16 for i in range(4)]
        cts2, acc2 = _sign_epoch(config, sender, msgs2)
        assert faae.averdec(receiver, cts2, acc2) == msgs2

    def test_truncated_batch_is_structural_error(self):
        config, _, sender, receiver = _setup("diamond1", 4, 4, 16)
        msgs = [bytes([i]) * 16 for i in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        pre = faae.averdec_offline(receiver, 4)
        with pytest.raises(StructuralError):
            faae.averdec_online(receiver, cts[:3], acc, pre)

    def test_partial_final_epoch(self):
        config, _, sender, receiver = _setup("diamond2", 6, 4, 16)
        msgs = [bytes([i]) * 16 for i in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        assert faae.averdec(receiver, cts, acc) == msgs
        tail = [b"\x77" * 16, b"\x88" * 16]  # n mod b = 2 final messages
        cts2, acc2 = _sign_epoch(config, sender, tail)
        pre = faae.averdec_offline(receiver, 2)
        assert faae.averdec_online(receiver, cts2, acc2, pre) == tail

    def test_wrong_length_ciphertext_rejected_before_crypto(self):
        config, _, sender, receiver = _setup("diamond1", 4, 4, 16)
        msgs = [bytes([i]) * 16 for i in range(4)]
        cts, acc = _sign_epoch(config, sender, msgs)
        pre = faae.averdec_offline(receiver, 4)
        with pytest.raises(ValueError):
            faae.averdec_online(receiver, cts[:3] + [b"short"], acc, pre)

    def test_averdec_online_cost_contract(self):
        for scheme in ALL_SCHEMES:
            config, _, sender, receiver = _setup(scheme, 4, 4, 16,
                                                 seed=f"vcost-{scheme}")
            msgs = [bytes([i]) * 16 for i in range(4)]
            cts, acc = _sign_epoch(config, sender, msgs)
            pre = faae.averdec_offline(receiver, 4)
            P.counters.reset()
            faae.averdec_online(receiver, cts, acc, pre)
            assert P.counters.prf_calls == 0, scheme
            assert P.counters.uh_calls == 4, scheme


class TestStorageModel:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    @pytest.mark.parametrize("msg_len", [16, 64, 128])
    def test_measured_footprint_matches_closed_form(self, scheme, msg_len):
        b = 8
        config, _, state, _ = _setup(scheme, b, b, msg_len,
                                     seed=f"st-{scheme}-{msg_len}")
        faae.precompute(state, b)
        assert state.offline_footprint_bytes() == offline_storage_bytes(config)

    def test_reported_scale_of_reference_figures(self):
        # batch 2^10: within +-50% of the published 60 KB (m=16) and
        # 175 KB (m=128) offline footprints
        c16 = make_config("diamond1", n=1024, b=1024, msg_len=16)
        c128 = make_config("diamond1", n=1024, b=1024, msg_len=128)
        s16 = offline_storage_bytes(c16)
        s128 = offline_storage_bytes(c128)
        assert s16 == 1024 * (16 + 32)
        assert s128 == 1024 * (128 + 32)
        assert 0.5 * 60_000 <= s16 <= 1.5 * 60_000
        assert 0.5 * 175_000 <= s128 <= 1.5 * 175_000


from statewalk import state_buffers


class TestBreachResilience:
    @pytest.mark.parametrize("scheme", ["diamond1", "diamond2", "graphene1"])
    def test_prior_period_material_absent_after_update(self, scheme):
        config, _, state, _ = _setup(scheme, 12, 4, 32, seed=f"br-{scheme}")
        history: set[bytes] = set()
        for _ in range(10):
            before = {b for b in state_buffers(state) if any(b)}
            pkt = faae.authenc_offline(state)
            history |= before
            history.add(bytes(pkt.pre_block.keystream if pkt.pre_block
                              else pkt.gcm_rec.keystream))
            history.add(bytes(pkt.pre_tag.mask if pkt.pre_tag
                              else pkt.gcm_rec.tag_mask))
            faae.authenc_online(state, b"\x01" * 32, pkt)
            retained = {b for b in state_buffers(state) if any(b)}
            assert not (retained & history), scheme
