use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::Zero;
use ppdt::he::{ClientKeys, HomomorphicKey, ProtocolParams};
use proptest::prelude::*;

fn keys() -> &'static ClientKeys {
    static KEYS: OnceLock<ClientKeys> = OnceLock::new();
    KEYS.get_or_init(|| ClientKeys::generate(ProtocolParams::testing(8)).unwrap())
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 512, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn paillier_addition(a in any::<[u8; 40]>(), b in any::<[u8; 40]>()) {
        let k = keys();
        let pk = &k.paillier.public;
        let (a, b) = (BigUint::from_bytes_be(&a), BigUint::from_bytes_be(&b));
        let sum = pk.add(&pk.encrypt(&a).unwrap(), &pk.encrypt(&b).unwrap()).unwrap();
        prop_assert_eq!(k.paillier.private.decrypt(&sum).unwrap(), (a + b) % pk.n());
    }

    #[test]
    fn paillier_scalar(m in any::<u64>(), s in any::<u64>()) {
        let k = keys();
        let pk = &k.paillier.public;
        let c = pk.scalar_mul(&pk.encrypt_u64(m).unwrap(), &BigUint::from(s)).unwrap();
        prop_assert_eq!(k.paillier.private.decrypt(&c).unwrap(), BigUint::from(m) * s % pk.n());
    }

    #[test]
    fn paillier_plain_add_and_rerandomize(m in any::<u64>(), s in any::<u64>()) {
        let k = keys();
        let pk = &k.paillier.public;
        let c = pk.encrypt_u64(m).unwrap();
        let r = pk.rerandomize(&c).unwrap();
        prop_assert_ne!(&r, &c);
        let c = pk.add_plain(&r, &BigUint::from(s)).unwrap();
        prop_assert_eq!(k.paillier.private.decrypt(&c).unwrap(), BigUint::from(m) + s);
    }

    #[test]
    fn signed_encoding_inverts(v in any::<i128>()) {
        let k = keys();
        let pk = &k.paillier.public;
        let v = BigInt::from(v);
        let enc = pk.encode_signed(&v).unwrap();
        prop_assert_eq!(pk.decode_signed(&enc).unwrap(), v.clone());
        let c = pk.encrypt(&enc).unwrap();
        prop_assert_eq!(k.paillier.private.decrypt_signed(&c).unwrap(), v);
    }

    #[test]
    fn signed_subtraction(x in 0u64..1 << 40, t in 0u64..1 << 40) {
        let k = keys();
        let pk = &k.paillier.public;
        let neg = pk.encrypt(&pk.encode_signed(&-BigInt::from(t)).unwrap()).unwrap();
        let diff = pk.add(&pk.encrypt_u64(x).unwrap(), &neg).unwrap();
        prop_assert_eq!(k.paillier.private.decrypt_signed(&diff).unwrap(), BigInt::from(x) - BigInt::from(t));
    }

    #[test]
    fn dgk_laws(a in 0u64..65537, b in 0u64..65537, s in 0u64..65537) {
        let k = keys();
        let pk = &k.dgk.public;
        let u = pk.u();
        let ca = pk.encrypt_u64(a).unwrap();
        let sum = pk.add(&ca, &pk.encrypt_u64(b).unwrap()).unwrap();
        prop_assert_eq!(k.dgk.private.decrypt(&sum).unwrap(), (a + b) % u);
        let prod = pk.scalar_mul(&ca, &BigUint::from(s)).unwrap();
        prop_assert_eq!(k.dgk.private.decrypt(&prod).unwrap(), a * s % u);
        prop_assert_eq!(k.dgk.private.is_zero(&prod).unwrap(), a * s % u == 0);
    }
}

#[test]
fn encryption_is_probabilistic() {
    let k = keys();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..500 {
        assert!(seen.insert(k.paillier.public.encrypt_u64(42).unwrap()));
        assert!(seen.insert(k.dgk.public.encrypt_u64(42).unwrap()));
    }
}

#[test]
fn dgk_zero_check_exhaustive_below_1024() {
    let k = keys();
    for m in 0..1024u64 {
        let c = k.dgk.public.encrypt_u64(m).unwrap();
        assert_eq!(k.dgk.private.is_zero(&c).unwrap(), m == 0, "m = {m}");
    }
}

#[test]
fn out_of_range_inputs_rejected() {
    let k = keys();
    let pk = &k.paillier.public;
    assert!(pk.encode_signed(&BigInt::from(pk.n().clone())).is_err());
    assert!(pk.encrypt(pk.n()).is_err());
    let big = rand::thread_rng().gen_biguint(2000);
    let forged = ppdt::he::Ciphertext::from_raw(ppdt::he::Scheme::Paillier, big);
    assert!(k.paillier.private.decrypt(&forged).is_err());
    let dgk_ct = k.dgk.public.encrypt(&BigUint::zero()).unwrap();
    assert!(pk.add(&dgk_ct, &dgk_ct).is_err());
}
