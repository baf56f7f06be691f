//! Values frozen from an independent double-precision autograd implementation
//! (fixtures/oracles/torch_reference.py) on a fixed model and batch.

use mireg::dataio::Role;
use mireg::densemath::DenseMatrix;
use mireg::kernelinfo::{gram, mi_and_grad_wrt_latent, mutual_information, renyi_entropy};
use mireg::neuralnet::{backward, Activation, Batch, Dense, MlpModel};
use mireg::objectives::{assemble_loss, coral_distance, mmd, ObjectiveKind, ObjectiveSpec};

const TOL: f64 = 1e-10;

fn layer(index: usize, in_dim: usize, out_dim: usize, activation: Activation) -> Dense {
    let l = index as f64;
    let mut data = Vec::with_capacity(in_dim * out_dim);
    for i in 0..in_dim {
        for j in 0..out_dim {
            let (i, j) = (i as f64, j as f64);
            data.push(0.5 * (1.3 * (l + 1.0) + 0.7 * i + 0.31 * j * (i + 1.0)).sin());
        }
    }
    Dense {
        weights: DenseMatrix::from_vec(in_dim, out_dim, data).unwrap(),
        bias: (0..out_dim).map(|j| 0.1 * (l + j as f64).cos()).collect(),
        activation,
    }
}

fn model() -> MlpModel {
    MlpModel {
        encoder: vec![
            layer(0, 3, 4, Activation::Relu),
            layer(1, 4, 2, Activation::Identity),
        ],
        decoder: vec![
            layer(2, 2, 4, Activation::Relu),
            layer(3, 4, 3, Activation::Identity),
        ],
        head: layer(4, 2, 2, Activation::Identity),
        seed: 0,
    }
}

fn batch() -> Batch {
    let data = (0..6)
        .flat_map(|r| (0..3).map(move |c| 1.2 * (0.9 * r as f64 + 1.7 * c as f64).sin()))
        .collect();
    let roles = (0..6)
        .map(|r| {
            if r % 2 == 0 {
                Role::Source
            } else {
                Role::Cross
            }
        })
        .collect();
    Batch::new(
        DenseMatrix::from_vec(6, 3, data).unwrap(),
        vec![0, 1, 1, 0, 1, 0],
        roles,
    )
    .unwrap()
}

fn spec(kind: ObjectiveKind) -> ObjectiveSpec {
    let base = ObjectiveSpec::new(kind, 2.0, 0.6, 0.4, 1.5).unwrap();
    match kind {
        ObjectiveKind::MtlsRed => base.with_latent_bandwidth(0.9).unwrap(),
        ObjectiveKind::MmdAe => base.with_mmd_bandwidth(1.1).unwrap(),
        _ => base,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

fn check(kind: ObjectiveKind, total: f64, expected: &[f64]) {
    let m = model();
    let b = batch();
    let s = spec(kind);
    let loss = assemble_loss(&s, &m, &b).unwrap();
    assert!(
        close(loss.total, total),
        "{kind} loss {} vs {total}",
        loss.total
    );
    let g = backward(&m, &b, &s).unwrap();
    assert!(
        close(g.loss.total, total),
        "{kind} backward loss {}",
        g.loss.total
    );
    let flat = g.flatten();
    assert_eq!(flat.len(), expected.len());
    for (i, (a, e)) in flat.iter().zip(expected).enumerate() {
        assert!(close(*a, *e), "{kind} parameter {i}: {a} vs {e}");
    }
}

#[test]
fn mtls_red_loss_and_gradient() {
    check(ObjectiveKind::MtlsRed, MTLS_RED_TOTAL, &MTLS_RED_GRAD);
}

#[test]
fn dmtae_loss_and_gradient() {
    check(ObjectiveKind::Dmtae, DMTAE_TOTAL, &DMTAE_GRAD);
}

#[test]
fn mmd_ae_loss_and_gradient() {
    check(ObjectiveKind::MmdAe, MMD_AE_TOTAL, &MMD_AE_GRAD);
}

#[test]
fn coral_loss_and_gradient() {
    check(ObjectiveKind::Coral, CORAL_TOTAL, &CORAL_GRAD);
}

#[test]
fn nsae_loss_and_gradient() {
    check(ObjectiveKind::Nsae, NSAE_TOTAL, &NSAE_GRAD);
}

fn kernel_inputs() -> (DenseMatrix, DenseMatrix) {
    let a = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [3.0, 1.0]])
        .unwrap();
    let b = DenseMatrix::from_rows(&[[0.5], [-1.0], [0.3], [2.0], [0.0]]).unwrap();
    (a, b)
}

#[test]
fn entropy_values() {
    let (a, _) = kernel_inputs();
    let g = gram(&a, 1.3).unwrap();
    assert!(close(renyi_entropy(&g, 2.0).unwrap().value, H2_X));
    let h15 = renyi_entropy(&g, 1.5).unwrap().value;
    assert!((h15 - H15_X).abs() < 1e-9, "{h15} vs {H15_X}");
}

#[test]
fn mutual_information_value_and_gradient() {
    let (a, b) = kernel_inputs();
    let mi = mutual_information(&gram(&a, 1.3).unwrap(), &gram(&b, 0.8).unwrap(), 2.0).unwrap();
    assert!(close(mi, MI_AB_BITS), "{mi}");
    let (nats, grad) = mi_and_grad_wrt_latent(&a, &b, 1.3, 0.8).unwrap();
    assert!(close(nats, MI_AB_BITS * std::f64::consts::LN_2));
    for (g, e) in grad.as_slice().iter().zip(MI_GRAD_NATS) {
        assert!(close(*g, e), "{g} vs {e}");
    }
}

#[test]
fn alignment_distances() {
    let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 1.0], [2.0, 0.5]]).unwrap();
    let b = DenseMatrix::from_rows(&[[0.5, 0.0], [1.5, 2.0], [0.0, 0.0], [1.0, 1.0]]).unwrap();
    assert!(close(mmd(&a, &b, 0.7).unwrap(), MMD_AB));
    assert!(close(coral_distance(&a, &b).unwrap(), CORAL_AB));
}

const MTLS_RED_TOTAL: f64 = 3.0097094526366988;
const MTLS_RED_GRAD: [f64; 59] = [
    -0.2450816662029782,
    0.40316536566181194,
    0.7631517325848307,
    0.541488677432846,
    0.05710614072174425,
    -0.02441650221876027,
    -0.24954088495047425,
    -0.17290385691240967,
    0.2303660425580538,
    -0.39687350190012854,
    -0.6988477943298278,
    -0.4969332574215958,
    -0.14690819071176864,
    0.3943328924332482,
    0.7081788879461993,
    0.639951631919175,
    -0.033242700509872845,
    -0.4270292518684792,
    -0.33706182368358933,
    -0.8066018914843279,
    -0.6389704844742146,
    -0.9113353205530206,
    -0.5663393341887838,
    -0.6031240271638068,
    -0.16489885565684198,
    -0.28473258927452516,
    -0.05106839813120673,
    -0.21766343119452722,
    -0.14002743981652438,
    0.17755692910854112,
    -0.09268462157482474,
    -0.29351970984077047,
    -0.16089426443786198,
    0.2744228034528827,
    0.0853879990043933,
    0.374913130054349,
    0.24585554199202098,
    -0.2993565608838239,
    -0.3674644255383166,
    0.07728298004264632,
    0.33694287765973346,
    -0.333858089880638,
    0.07030571303989742,
    0.30661678867669084,
    -0.25943878182419955,
    0.06448846498167687,
    0.2360205260653135,
    -0.1651777314977323,
    0.0595574779129761,
    0.14564425871492634,
    -0.3909183097833736,
    0.17207054062625116,
    0.2691963746969007,
    -0.08947146851516913,
    0.08947146851516911,
    -0.11252990304936437,
    0.11252990304936436,
    -0.0053784382960716665,
    0.005378438296071708,
];
const DMTAE_TOTAL: f64 = 2.273717376885729;
const DMTAE_GRAD: [f64; 59] = [
    -0.062198817108934816,
    0.11605719076978482,
    0.2032790517673198,
    0.12766004714803642,
    0.010727548697281257,
    -0.017523512179619418,
    -0.060851175606550095,
    -0.06185428292895946,
    0.059434445935071176,
    -0.11154157463965576,
    -0.1875983738706916,
    -0.11172087954004825,
    -0.05237441203655751,
    0.11335222774199778,
    0.20225385175559005,
    0.1388759583210062,
    -0.02105186071945757,
    -0.10630156449435595,
    -0.08139260877607359,
    -0.2264255009313799,
    -0.13274180062772203,
    -0.27152395909137533,
    -0.12812461224219995,
    -0.1950253120089602,
    -0.1648988556568421,
    -0.2847325892745253,
    -0.05106839813120673,
    -0.21766343119452722,
    -0.14002743981652438,
    0.17755692910854112,
    -0.09268462157482474,
    -0.29351970984077047,
    -0.16089426443786198,
    0.2744228034528827,
    0.0853879990043933,
    0.374913130054349,
    0.24585554199202098,
    -0.2993565608838239,
    -0.3674644255383166,
    0.07728298004264632,
    0.33694287765973346,
    -0.333858089880638,
    0.07030571303989742,
    0.30661678867669084,
    -0.25943878182419955,
    0.06448846498167687,
    0.2360205260653135,
    -0.1651777314977323,
    0.0595574779129761,
    0.14564425871492634,
    -0.3909183097833736,
    0.17207054062625116,
    0.2691963746969007,
    -0.08947146851516913,
    0.08947146851516911,
    -0.11252990304936437,
    0.11252990304936436,
    -0.0053784382960716665,
    0.005378438296071708,
];
const MMD_AE_TOTAL: f64 = 2.282329597720408;
const MMD_AE_GRAD: [f64; 59] = [
    -0.06738436073708684,
    0.12299435644887094,
    0.21906613958580445,
    0.14154482318760062,
    0.023373983443115663,
    -0.035141044378568194,
    -0.09947446426417055,
    -0.074666330594017,
    0.061361142584286425,
    -0.11393889626492452,
    -0.1934326654989339,
    -0.12230413197502348,
    -0.047728730843583415,
    0.11335222774199778,
    0.20225385175559002,
    0.155617487613618,
    -0.00925939601707827,
    -0.09681978468080114,
    -0.08189733302839558,
    -0.2252846391660675,
    -0.1506578791199303,
    -0.2826224006131624,
    -0.14710571897627903,
    -0.20886069886457592,
    -0.16489885565684204,
    -0.2847325892745253,
    -0.05106839813120673,
    -0.21766343119452722,
    -0.14002743981652438,
    0.17755692910854112,
    -0.09268462157482474,
    -0.29351970984077047,
    -0.16089426443786198,
    0.2744228034528827,
    0.0853879990043933,
    0.374913130054349,
    0.24585554199202098,
    -0.2993565608838239,
    -0.3674644255383166,
    0.07728298004264632,
    0.33694287765973346,
    -0.333858089880638,
    0.07030571303989742,
    0.30661678867669084,
    -0.25943878182419955,
    0.06448846498167687,
    0.2360205260653135,
    -0.1651777314977323,
    0.0595574779129761,
    0.14564425871492634,
    -0.3909183097833736,
    0.17207054062625116,
    0.2691963746969007,
    -0.08947146851516913,
    0.08947146851516911,
    -0.11252990304936437,
    0.11252990304936436,
    -0.0053784382960716665,
    0.005378438296071708,
];
const CORAL_TOTAL: f64 = 2.462382669209079;
const CORAL_GRAD: [f64; 59] = [
    -0.25448533952556623,
    0.2958786829142447,
    0.5968690286371404,
    0.4606844767498294,
    0.3770766647922919,
    -0.34673235952106196,
    -0.7936010743553074,
    -0.390170842035835,
    0.1573168351539544,
    -0.20652957187747414,
    -0.3923667704417511,
    -0.3601417470878969,
    -0.050735552152614494,
    0.09287755026709833,
    0.15793786077775426,
    0.3558687335633318,
    0.26142087927577023,
    0.08708101627451457,
    -0.15360702747013458,
    -0.29281827201973787,
    -0.5700583517272483,
    -0.5961276178021696,
    -0.6227245672627999,
    -0.5481998803497273,
    -0.16489885565684229,
    -0.2847325892745252,
    -0.05106839813120673,
    -0.21766343119452722,
    -0.14002743981652438,
    0.17755692910854112,
    -0.09268462157482474,
    -0.29351970984077047,
    -0.16089426443786198,
    0.2744228034528827,
    0.0853879990043933,
    0.374913130054349,
    0.24585554199202098,
    -0.2993565608838239,
    -0.3674644255383166,
    0.07728298004264632,
    0.33694287765973346,
    -0.333858089880638,
    0.07030571303989742,
    0.30661678867669084,
    -0.25943878182419955,
    0.06448846498167687,
    0.2360205260653135,
    -0.1651777314977323,
    0.0595574779129761,
    0.14564425871492634,
    -0.3909183097833736,
    0.17207054062625116,
    0.2691963746969007,
    -0.08947146851516913,
    0.08947146851516911,
    -0.11252990304936437,
    0.11252990304936436,
    -0.0053784382960716665,
    0.005378438296071708,
];
const NSAE_TOTAL: f64 = 2.2894468106510093;
const NSAE_GRAD: [f64; 59] = [
    -0.07136061575308374,
    0.1271588452776695,
    0.22623392103763126,
    0.14590810111737787,
    0.011037586237444356,
    -0.018801015813790744,
    -0.06496886375065379,
    -0.06649301808832186,
    0.06851635131907022,
    -0.12231403052812946,
    -0.2094921602478156,
    -0.1287735825378319,
    -0.060825407037650825,
    0.12445838676951487,
    0.22544176355479378,
    0.15751620141405587,
    -0.029281641664490318,
    -0.11550446010943383,
    -0.10079040215208113,
    -0.24586797897484908,
    -0.15782727395262938,
    -0.2947716287377638,
    -0.14836134543194016,
    -0.2119755909774947,
    -0.19371518740859942,
    -0.30989353662087565,
    -0.04670525502038441,
    -0.24265275347182685,
    -0.16571646919448754,
    0.18681315593950054,
    -0.0883634639904677,
    -0.32732719315366976,
    -0.19426383875462808,
    0.2884992952512378,
    0.07863195511177075,
    0.4163026040549079,
    0.28811833633018386,
    -0.31494322347472214,
    -0.40157206913941923,
    0.10661743448639659,
    0.37359741253821377,
    -0.36493641948515426,
    0.09713791039203433,
    0.3401414303477776,
    -0.2833823162333349,
    0.08561501887078896,
    0.2620954606404402,
    -0.17996057384684963,
    0.07338511970416554,
    0.16211406356915023,
    -0.3909183097833736,
    0.17207054062625116,
    0.2691963746969007,
    -0.08947146851516913,
    0.08947146851516911,
    -0.11252990304936437,
    0.11252990304936436,
    -0.0053784382960716665,
    0.005378438296071708,
];
const H2_X: f64 = 1.4688345901864834;
const H15_X: f64 = 1.6025806785443375;
const MI_AB_BITS: f64 = 0.45080955498505526;
const MI_GRAD_NATS: [f64; 5] = [
    0.27300972621133723,
    -0.1552341879478268,
    0.10708772441448022,
    0.015881431619622532,
    -0.2407446942976132,
];
const MMD_AB: f64 = 0.38340330951823165;
const CORAL_AB: f64 = 2.423611111111111;
