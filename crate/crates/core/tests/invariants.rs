use lrv::eval::summarize;
use lrv::io::{decode_theta, encode_theta, ThetaHeader};
use lrv::mcnet::{init_theta, McNetwork, Network, ProposalSpec};
use lrv::models::basket::cholesky_l;
use lrv::models::basket::worst_of_domain;
use lrv::models::{barrier, bs_call, lorentz, Antithetic, BarrierAvgPut, BsCall, Kernel, Lorentz, WorstOfPut};
use lrv::{region_check, RngStream, SobolSequence};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_norms_are_ordered(errs in prop::collection::vec(-1e3..1e3f64, 1..200)) {
        let r = summarize(&errs);
        prop_assert!(r.l1 <= r.l2 && r.l2 <= r.linf);
    }

    #[test]
    fn theta_files_round_trip(seed in any::<u64>(), samples in 1usize..64) {
        let spec = ProposalSpec::mc(samples, 3);
        let theta = init_theta(&spec, &mut RngStream::new(seed, "t")).unwrap();
        let header = ThetaHeader {
            version: 1,
            model: "worst_of_put".into(),
            layout: spec,
            seed,
            config_hash: "0".repeat(64),
            step: 17,
            len: theta.len(),
        };
        let bytes = encode_theta(&header, &theta.values).unwrap();
        let (back, decoded) = decode_theta(&bytes).unwrap();
        prop_assert_eq!(back.step, 17);
        prop_assert_eq!(decoded.values, theta.values);
    }

    #[test]
    fn named_streams_are_reproducible(seed in any::<u64>(), i in 0u64..1000) {
        let root = RngStream::new(seed, "root");
        let a = root.split_indexed("x", i).standard_normal(8);
        let b = root.split_indexed("x", i).standard_normal(8);
        let c = root.split_indexed("x", i + 1).standard_normal(8);
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(a, c);
    }

    #[test]
    fn antithetic_kernels_are_even(seed in any::<u64>()) {
        let mut s = RngStream::new(seed, "even");
        let p = barrier::domain().sample_uniform(&mut s).unwrap();
        let w = s.standard_normal(30);
        let neg: Vec<f64> = w.iter().map(|x| -x).collect();
        let k = Antithetic(BarrierAvgPut { steps: 10 });
        prop_assert!((k.value(&p, &w) - k.value(&p, &neg)).abs() <= 1e-12 * (1.0 + k.value(&p, &w).abs()));
    }

    #[test]
    fn sobol_points_lie_in_unit_cube(index in 0u64..1 << 20, dim in 1usize..128) {
        let mut out = vec![0.0; dim];
        SobolSequence::new(dim).unwrap().point_at(index, &mut out);
        prop_assert!(out.iter().all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn region_points_admit_cholesky(seed in any::<u64>()) {
        let p = worst_of_domain().sample_uniform(&mut RngStream::new(seed, "rho")).unwrap();
        let rho = [p[11], p[12], p[13]];
        prop_assert!(region_check(rho));
        prop_assert!(cholesky_l(rho).is_ok());
    }

    #[test]
    fn payoffs_are_finite_and_nonnegative(seed in any::<u64>()) {
        let mut s = RngStream::new(seed, "payoffs");
        let p = bs_call::domain().sample_uniform(&mut s).unwrap();
        let w = s.standard_normal(1);
        prop_assert!(BsCall.value(&p, &w) >= 0.0);
        let p = worst_of_domain().sample_uniform(&mut s).unwrap();
        let w = s.standard_normal(3);
        prop_assert!(WorstOfPut.value(&p, &w) >= 0.0);
        let p = lorentz::domain().sample_uniform(&mut s).unwrap();
        let w = s.standard_normal(75);
        let v = Lorentz { steps: 25 }.value(&p, &w);
        prop_assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn mc_network_is_sample_mean(seed in any::<u64>(), samples in 1usize..32) {
        let mut s = RngStream::new(seed, "net");
        let p = bs_call::domain().sample_uniform(&mut s).unwrap();
        let theta = s.standard_normal(samples);
        let mean = theta.iter().map(|w| BsCall.value(&p, std::slice::from_ref(w))).sum::<f64>() / samples as f64;
        let net = McNetwork::new(BsCall, samples).eval(&p, &theta);
        prop_assert!((net - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
    }
}
