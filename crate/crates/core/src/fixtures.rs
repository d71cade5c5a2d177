//! Bundled example data: the three-place net with its initial belief, and
//! the location-privacy net with four observer roles.

use crate::mbn::Mbn;
use crate::net::Net;

pub const FIG2_NET_JSON: &str = include_str!("../fixtures/fig2_net.json");
pub const FIG4_MBN_JSON: &str = include_str!("../fixtures/fig4_mbn.json");
pub const LOCATION_PRIVACY_NET_JSON: &str = include_str!("../fixtures/location_privacy_net.json");

pub fn fig2_net() -> Net {
    Net::from_json_str(FIG2_NET_JSON).expect("bundled net is valid")
}

/// Initial belief for [`fig2_net`] as a three-node network.
pub fn fig4_mbn() -> Mbn {
    Mbn::from_json_str(FIG4_MBN_JSON).expect("bundled network is valid")
}

pub fn location_privacy_net() -> Net {
    Net::from_json_str(LOCATION_PRIVACY_NET_JSON).expect("bundled net is valid")
}

/// Belief columns over `S1 S2 S3`, listed from marking 111 down to 000,
/// for the update sequence: succeed with t4, then fail t1 for its pre-set.
pub mod fig2 {
    pub const INIT: [f64; 8] = [1. / 12., 1. / 6., 1. / 8., 1. / 8., 1. / 12., 1. / 6., 1. / 8., 1. / 8.];
    pub const AS_S2_1: [f64; 8] = [1. / 6., 1. / 3., 0., 0., 1. / 6., 1. / 3., 0., 0.];
    pub const AS_S3_0: [f64; 8] = [0., 0.5, 0., 0., 0., 0.5, 0., 0.];
    pub const SET_S2_0: [f64; 8] = [0., 0., 0., 0.5, 0., 0., 0., 0.5];
    pub const SET_S3_1: [f64; 8] = [0., 0., 0.5, 0., 0., 0., 0.5, 0.];
    pub const NAS_S1_1: [f64; 8] = [0., 0., 0., 0., 0., 0., 1., 0.];
}
