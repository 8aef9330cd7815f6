use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::compare::ClientSession;
use crate::he::{ClientKeys, HomomorphicKey, PublicKeys};
use crate::net::{Listener, MemNetwork, Network};
use crate::test_support::client_keys;
use crate::tree::{partition_and_encrypt, Attribute, AttributeSchema, TreeModel, TreeNode};
use crate::wire::{read_message, write_message, Message};

fn stump_slices(keys: &PublicKeys) -> Vec<LevelSlice> {
    let model = TreeModel {
        schema: AttributeSchema {
            attributes: vec![Attribute::numeric("a")],
            classes: (0..5).map(|c| c.to_string()).collect(),
        },
        levels: vec![
            vec![TreeNode::internal(0, 5, CompareMode::Numeric, 1, 0)],
            vec![
                TreeNode::internal(0, 1, CompareMode::Numeric, 0, 1),
                TreeNode::internal(0, 1, CompareMode::Numeric, 2, 3),
            ],
            vec![TreeNode::leaf(1), TreeNode::leaf(2), TreeNode::leaf(4), TreeNode::leaf(3)],
        ],
    };
    partition_and_encrypt(&model, keys, &keys.params).unwrap()
}

fn token(keys: &PublicKeys, fv: &[u64], next_index: usize, client: &str, bogus: bool) -> TraversalToken {
    TraversalToken {
        session: SessionId([7; 16]),
        next_index,
        enc_features: fv.iter().map(|&v| keys.paillier.encrypt_u64(v).unwrap()).collect(),
        client_endpoint: client.into(),
        bogus,
    }
}

#[test]
fn plan_selects_leaf_internal_and_bogus() {
    let keys = client_keys(4);
    let public = keys.public();
    let slices = stump_slices(&public);
    let t = token(&public, &[9], 2, "c", false);
    let Step::Reply { enc_class } = plan_traversal(&slices[2], &t).unwrap() else { panic!() };
    assert_eq!(keys.paillier.private.decrypt(enc_class).unwrap(), BigUint::from(4u8));

    let t = token(&public, &[9], 0, "c", false);
    assert!(matches!(
        plan_traversal(&slices[0], &t).unwrap(),
        Step::Compare { attribute: 0, mode: CompareMode::Numeric, true_child: 1, false_child: 0, .. }
    ));

    let t = token(&public, &[9], 1_000_003, "c", true);
    assert!(matches!(plan_traversal(&slices[2], &t).unwrap(), Step::Bogus { .. }));

    let t = token(&public, &[9], 4, "c", false);
    assert!(matches!(plan_traversal(&slices[2], &t), Err(SiteError::BadIndex { index: 4, len: 4 })));
    let t = token(&public, &[9, 9], 0, "c", false);
    assert!(matches!(plan_traversal(&slices[2], &t), Err(SiteError::FeatureCount { expected: 1, got: 2 })));
}

#[test]
fn padding_draws() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    assert_eq!(padding_delay(None, &mut rng), Duration::ZERO);
    assert_eq!(padding_delay(Some((0, 0)), &mut rng), Duration::ZERO);
    for _ in 0..200 {
        let d = padding_delay(Some((500, 1000)), &mut rng).as_millis();
        assert!((500..=1000).contains(&d));
    }
    let mean = (0..100).map(|_| padding_delay(Some((100, 200)), &mut rng).as_millis() as f64).sum::<f64>() / 100.0;
    assert!((140.0..=160.0).contains(&mean), "mean {mean}");
}

#[test]
fn applied_padding_is_measurable() {
    let mut config = SiteConfig::new(0, None);
    config.padding = Some((50, 80));
    let start = Instant::now();
    let drawn = apply_padding(&config);
    let elapsed = start.elapsed();
    assert!((50..=80).contains(&drawn.as_millis()));
    assert!(elapsed >= drawn);
}

/// Answers comparison rounds on `listener` until a RESULT arrives or the
/// channel closes; returns the decrypted result if any.
fn fake_client(keys: Arc<ClientKeys>, listener: Box<dyn Listener>) -> std::thread::JoinHandle<(u32, Option<u64>)> {
    std::thread::spawn(move || {
        let mut comparisons = 0;
        loop {
            let Ok(mut conn) = listener.accept() else { return (comparisons, None) };
            match read_message(&mut conn).unwrap() {
                Message::Compare(first) => {
                    let mut session = ClientSession::new(keys.clone(), first.session());
                    let mut msg = first;
                    loop {
                        if let Some(reply) = session.handle(&msg, &mut rand::rngs::OsRng).unwrap() {
                            write_message(&mut conn, &Message::Compare(reply)).unwrap();
                        }
                        if session.is_done() {
                            break;
                        }
                        let Message::Compare(m) = read_message(&mut conn).unwrap() else { panic!() };
                        msg = m;
                    }
                    comparisons += 1;
                }
                Message::Result { enc_class, .. } => {
                    let class = keys.paillier.private.decrypt(&enc_class).unwrap();
                    return (comparisons, Some(class.try_into().unwrap()));
                }
                other => panic!("client got {other:?}"),
            }
        }
    })
}

#[test]
fn internal_node_compares_then_forwards() {
    let keys = client_keys(4);
    let public = keys.public();
    let net = MemNetwork::new();
    let client_listener = net.listen("client:0").unwrap();
    let client_ep = client_listener.endpoint();
    let downstream = net.listen("next:0").unwrap();
    let slices = stump_slices(&public);

    let telemetry = Arc::new(Telemetry::default());
    let site =
        LevelSite::with_telemetry(SiteConfig::new(0, Some(downstream.endpoint())), net.clone(), telemetry.clone());
    site.install(public.clone(), slices[0].clone()).unwrap();

    let client = fake_client(keys.clone(), client_listener);
    site.handle_traversal(token(&public, &[9], 0, &client_ep, false));
    let mut conn = downstream.accept().unwrap();
    let Message::Traversal(next) = read_message(&mut conn).unwrap() else { panic!() };
    assert_eq!(next.next_index, 1);
    assert!(!next.bogus);
    assert_eq!(next.session, SessionId([7; 16]));
    assert_eq!(keys.paillier.private.decrypt(&next.enc_features[0]).unwrap(), BigUint::from(9u8));

    let trace = telemetry.get(SessionId([7; 16])).unwrap();
    assert_eq!((trace.comparisons, trace.forwards, trace.ended), (1, 1, false));
    drop(site);
    drop(net);
    drop(client);
}

#[test]
fn leaf_replies_and_bogus_continues() {
    let keys = client_keys(4);
    let public = keys.public();
    let net = MemNetwork::new();
    let client_listener = net.listen("client:0").unwrap();
    let client_ep = client_listener.endpoint();
    let downstream = net.listen("next:0").unwrap();

    // Level 1 of a 3-level tree whose nodes are both leaves.
    let model = TreeModel {
        schema: AttributeSchema {
            attributes: vec![Attribute::numeric("a")],
            classes: (0..5).map(|c| c.to_string()).collect(),
        },
        levels: vec![
            vec![TreeNode::internal(0, 5, CompareMode::Numeric, 1, 0)],
            vec![TreeNode::leaf(4), TreeNode::internal(0, 1, CompareMode::Numeric, 0, 1)],
            vec![TreeNode::leaf(1), TreeNode::leaf(2)],
        ],
    };
    let slices = partition_and_encrypt(&model, &public, &public.params).unwrap();
    let mut config = SiteConfig::new(1, Some(downstream.endpoint()));
    config.bogus_continuation = true;
    let telemetry = Arc::new(Telemetry::default());
    let site = LevelSite::with_telemetry(config, net.clone(), telemetry.clone());
    site.install(public.clone(), slices[1].clone()).unwrap();

    let client = fake_client(keys.clone(), client_listener);
    site.handle_traversal(token(&public, &[2], 0, &client_ep, false));
    assert_eq!(client.join().unwrap(), (0, Some(4)));
    let mut conn = downstream.accept().unwrap();
    let Message::Traversal(next) = read_message(&mut conn).unwrap() else { panic!() };
    assert!(next.bogus);

    // A bogus token arriving here performs local work only.
    let site2 = LevelSite::with_telemetry(SiteConfig::new(2, None), net.clone(), telemetry.clone());
    site2.install(public.clone(), slices[2].clone()).unwrap();
    site2.handle_traversal(next);
    let trace = telemetry.get(SessionId([7; 16])).unwrap();
    assert_eq!(
        (trace.results, trace.forwards, trace.bogus_forwards, trace.dummy_rounds, trace.ended),
        (1, 1, 1, 1, true)
    );
}

#[test]
fn setup_checks() {
    let keys = client_keys(4);
    let public = keys.public();
    let slices = stump_slices(&public);
    let net = MemNetwork::new();
    let site = LevelSite::new(SiteConfig::new(1, Some("x".into())), net.clone());
    assert!(matches!(site.install_slice(slices[1].clone()), Err(SiteError::Setup(_))));
    site.install_keys(public.clone()).unwrap();
    assert!(site.install_slice(slices[0].clone()).is_err());
    site.install_slice(slices[1].clone()).unwrap();
    site.install_slice(slices[1].clone()).unwrap();
    let last_without_downstream = LevelSite::new(SiteConfig::new(2, Some("x".into())), net);
    assert!(last_without_downstream.install(public, slices[2].clone()).is_err());
}
