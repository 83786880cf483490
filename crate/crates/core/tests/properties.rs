//! Property tests for the codec and ledger invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use wursim_core::codec::{
    decode_manchester, deserialize_mac, encode_manchester, fdma_align, ppdu_airtime, serialize_mac,
    DataRate, FdmaEntry, WurFrame, WurFrameType,
};
use wursim_core::station::{EnergyLedger, PcrState, PowerProfile, WurState};
use wursim_core::time::SimTime;

fn arb_rate() -> impl Strategy<Value = DataRate> {
    prop_oneof![Just(DataRate::Ldr), Just(DataRate::Hdr)]
}

fn arb_frame() -> impl Strategy<Value = WurFrame> {
    (0u8..4, 0u16..4096, 0u16..4096, vec(any::<u8>(), 0..24)).prop_map(
        |(code, addr, td, body)| {
            let frame_type = WurFrameType::from_code(code).unwrap();
            WurFrame::new(frame_type, addr, td, body).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn manchester_round_trips(bits in vec(any::<bool>(), 0..256), rate in arb_rate()) {
        let seq = encode_manchester(&bits, rate);
        prop_assert_eq!(seq.symbols.len(), bits.len() * rate.symbols_per_bit());
        prop_assert_eq!(decode_manchester(&seq.symbols, rate).unwrap(), bits);
    }

    #[test]
    fn mac_serialization_round_trips(frame in arb_frame()) {
        let bits = serialize_mac(&frame).unwrap();
        prop_assert_eq!(bits.len(), 48 + frame.body.len() * 8);
        prop_assert_eq!(deserialize_mac(&bits).unwrap(), frame);
    }

    #[test]
    fn airtime_monotone_in_payload_and_rate(
        addr in 0u16..4096,
        len_a in 0usize..16,
        extra in 1usize..8,
        rate in arb_rate(),
    ) {
        let short = WurFrame::new(WurFrameType::WakeUp, addr, 0, vec![0; len_a]).unwrap();
        let long = WurFrame::new(WurFrameType::WakeUp, addr, 0, vec![0; len_a + extra]).unwrap();
        let t_short = ppdu_airtime(&short, rate).unwrap().total_us();
        let t_long = ppdu_airtime(&long, rate).unwrap().total_us();
        prop_assert!(t_long > t_short);
        let ldr = ppdu_airtime(&short, DataRate::Ldr).unwrap().total_us();
        let hdr = ppdu_airtime(&short, DataRate::Hdr).unwrap().total_us();
        prop_assert!(ldr > hdr);
    }

    #[test]
    fn fdma_aligns_all_durations(
        frames in vec((0u16..4096, vec(any::<u8>(), 0..8), arb_rate()), 1..8),
    ) {
        let entries: Vec<FdmaEntry> = frames
            .into_iter()
            .enumerate()
            .map(|(i, (addr, body, rate))| FdmaEntry {
                subchannel: i as u8,
                frame: WurFrame::new(WurFrameType::WakeUp, addr, 0, body).unwrap(),
                rate,
            })
            .collect();
        let before: Vec<_> =
            entries.iter().map(|e| ppdu_airtime(&e.frame, e.rate).unwrap()).collect();
        let layouts = fdma_align(&entries).unwrap();
        let max = layouts.iter().map(|l| l.total_us()).max().unwrap();
        for (aligned, orig) in layouts.iter().zip(&before) {
            prop_assert_eq!(aligned.total_us(), max);
            // Padding goes after WUR-Data; field boundaries are untouched.
            prop_assert_eq!(aligned.preamble_us, orig.preamble_us);
            prop_assert_eq!(aligned.bpsk_mark_us, orig.bpsk_mark_us);
            prop_assert_eq!(aligned.sync_us, orig.sync_us);
            prop_assert_eq!(aligned.data_us, orig.data_us);
        }
    }

    #[test]
    fn ledger_energy_is_split_invariant(
        spans in vec((1u64..1_000_000, 0usize..4), 1..12),
        cut in any::<prop::sample::Index>(),
    ) {
        let states = [
            (PcrState::Doze, WurState::Off),
            (PcrState::Doze, WurState::On),
            (PcrState::Listening, WurState::Off),
            (PcrState::Transmitting, WurState::Off),
        ];
        let mut ledger = EnergyLedger::new(
            PowerProfile::default(),
            SimTime::ZERO,
            PcrState::Doze,
            WurState::Off,
        );
        let mut t = 0u64;
        for (span, state) in &spans {
            t += span;
            let (pcr, wur) = states[*state];
            ledger.transition(SimTime::from_nanos(t), pcr, wur);
        }
        let end = SimTime::from_nanos(t);
        let mid = SimTime::from_nanos(cut.index(t as usize + 1) as u64);
        let whole = ledger.energy_fj(SimTime::ZERO, end);
        let left = ledger.energy_fj(SimTime::ZERO, mid);
        let right = ledger.energy_fj(mid, end);
        prop_assert_eq!(whole, left + right);
    }
}
