//! Static video and channel features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelRecord, VideoRecord};

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Which metadata vector to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetadataMode {
    /// (activeness, favorability, view rate, duration).
    Full,
    /// View rate dropped; the variant fused with temporal and comment features.
    NoViewRate,
}

/// Conditions where a ratio had a zero denominator and was set to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataFlags {
    pub zero_views: bool,
    pub zero_reactions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    /// likes / views.
    pub activeness: f64,
    /// dislikes / (likes + dislikes).
    pub favorability: f64,
    /// views per day since publishing; absent in [`MetadataMode::NoViewRate`].
    pub view_rate: Option<f64>,
    /// Duration in seconds.
    pub duration: f64,
    pub mode: MetadataMode,
    pub flags: MetadataFlags,
}

impl VideoFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.activeness, self.favorability];
        if let Some(g) = self.view_rate {
            v.push(g);
        }
        v.push(self.duration);
        v
    }

    pub fn names(mode: MetadataMode) -> &'static [&'static str] {
        match mode {
            MetadataMode::Full => &["activeness", "favorability", "view_rate", "duration"],
            MetadataMode::NoViewRate => &["activeness", "favorability", "duration"],
        }
    }
}

/// likes / (likes + dislikes); reported, not used as a model input.
pub fn rating(video: &VideoRecord) -> Option<f64> {
    let total = video.likes + video.dislikes;
    (total > 0).then(|| video.likes as f64 / total as f64)
}

pub fn extract_video_features(
    video: &VideoRecord,
    mode: MetadataMode,
    now: i64,
) -> Result<VideoFeatures> {
    if now < video.publish_time {
        return Err(Error::invalid(format!(
            "reference time {now} precedes publish time {} of {}",
            video.publish_time, video.video_id
        )));
    }
    let mut flags = MetadataFlags::default();
    let activeness = if video.views == 0 {
        flags.zero_views = true;
        0.0
    } else {
        video.likes as f64 / video.views as f64
    };
    let reactions = video.likes + video.dislikes;
    let favorability = if reactions == 0 {
        flags.zero_reactions = true;
        0.0
    } else {
        video.dislikes as f64 / reactions as f64
    };
    let view_rate = match mode {
        MetadataMode::Full => {
            let age_days = ((now - video.publish_time) as f64 / SECONDS_PER_DAY)
                .max(1.0 / SECONDS_PER_DAY);
            Some(video.views as f64 / age_days)
        }
        MetadataMode::NoViewRate => None,
    };
    Ok(VideoFeatures {
        activeness,
        favorability,
        view_rate,
        duration: video.duration_s as f64,
        mode,
        flags,
    })
}

/// Channel counts in fixed order: hidden subscribers, videos, subscribers,
/// views, comments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures(pub [f64; 5]);

impl ChannelFeatures {
    pub const NAMES: [&'static str; 5] = [
        "hidden_subscriber_count",
        "video_count",
        "subscriber_count",
        "view_count",
        "comment_count",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

pub fn extract_channel_features(channel: &ChannelRecord) -> ChannelFeatures {
    ChannelFeatures([
        channel.hidden_subscriber_count as f64,
        channel.video_count as f64,
        channel.subscriber_count as f64,
        channel.view_count as f64,
        channel.comment_count as f64,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Genre;
    use proptest::prelude::*;

    fn video(likes: u64, dislikes: u64, views: u64) -> VideoRecord {
        VideoRecord {
            video_id: "v".into(),
            channel_id: "c".into(),
            publish_time: 0,
            duration_s: 360,
            views,
            likes,
            dislikes,
            comment_count: 0,
            genre: Genre::MU,
            title: String::new(),
            uploader_verified: false,
            label: None,
        }
    }

    const WEEK: i64 = 7 * 86_400;

    #[test]
    fn direct_ratios() {
        let f = extract_video_features(&video(50, 0, 200), MetadataMode::Full, WEEK).unwrap();
        assert_eq!(f.activeness, 0.25);
        let f = extract_video_features(&video(30, 10, 700), MetadataMode::Full, WEEK).unwrap();
        assert_eq!(f.favorability, 0.25);
        assert!((f.view_rate.unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(f.duration, 360.0);
    }

    #[test]
    fn degenerate_denominators_are_flagged() {
        let f = extract_video_features(&video(0, 0, 0), MetadataMode::Full, WEEK).unwrap();
        assert_eq!((f.activeness, f.favorability), (0.0, 0.0));
        assert!(f.flags.zero_views && f.flags.zero_reactions);
    }

    #[test]
    fn just_published_video_uses_floor() {
        let f = extract_video_features(&video(0, 0, 5), MetadataMode::Full, 0).unwrap();
        assert_eq!(f.view_rate, Some(5.0 * 86_400.0));
    }

    #[test]
    fn now_before_publish_is_rejected() {
        let mut v = video(1, 1, 1);
        v.publish_time = 100;
        assert!(extract_video_features(&v, MetadataMode::Full, 50).is_err());
    }

    #[test]
    fn channel_passthrough() {
        let ch = ChannelRecord {
            channel_id: "c".into(),
            title: String::new(),
            country: None,
            hidden_subscriber_count: 1,
            video_count: 10,
            subscriber_count: 100,
            view_count: 1000,
            comment_count: 50,
            label: None,
        };
        assert_eq!(extract_channel_features(&ch).0, [1.0, 10.0, 100.0, 1000.0, 50.0]);
        let zero = ChannelRecord {
            hidden_subscriber_count: 0,
            video_count: 0,
            subscriber_count: 0,
            view_count: 0,
            comment_count: 0,
            ..ch
        };
        assert_eq!(extract_channel_features(&zero).0, [0.0; 5]);
    }

    #[test]
    fn channel_order_independent_of_input_field_order() {
        let a = r#"{"channel_id":"c","title":"t","hidden_subscriber_count":1,"video_count":10,"subscriber_count":100,"view_count":1000,"comment_count":50}"#;
        let b = r#"{"comment_count":50,"view_count":1000,"title":"t","subscriber_count":100,"video_count":10,"channel_id":"c","hidden_subscriber_count":1}"#;
        let ca: ChannelRecord = serde_json::from_str(a).unwrap();
        let cb: ChannelRecord = serde_json::from_str(b).unwrap();
        assert_eq!(extract_channel_features(&ca), extract_channel_features(&cb));
    }

    proptest! {
        #[test]
        fn scaling_properties(likes in 1u64..10_000, dislikes in 1u64..10_000, views in 1u64..100_000, k in 2u64..50) {
            let base = extract_video_features(&video(likes, dislikes, views), MetadataMode::Full, WEEK).unwrap();
            let scaled = extract_video_features(&video(likes * k, dislikes * k, views), MetadataMode::Full, WEEK).unwrap();
            prop_assert!((scaled.activeness - k as f64 * base.activeness).abs() <= 1e-12 * scaled.activeness.max(1.0));
            prop_assert!((scaled.favorability - base.favorability).abs() <= 1e-15);
            let more_views = extract_video_features(&video(likes, dislikes, views * k), MetadataMode::Full, WEEK).unwrap();
            prop_assert!((more_views.view_rate.unwrap() - k as f64 * base.view_rate.unwrap()).abs() <= 1e-9 * more_views.view_rate.unwrap());
        }

        #[test]
        fn no_view_rate_mode_drops_only_view_rate(likes in 0u64..1000, dislikes in 0u64..1000, views in 0u64..10_000) {
            let v = video(likes, dislikes, views);
            let full = extract_video_features(&v, MetadataMode::Full, WEEK).unwrap().to_vec();
            let short = extract_video_features(&v, MetadataMode::NoViewRate, WEEK).unwrap().to_vec();
            prop_assert_eq!(full.len(), 4);
            prop_assert_eq!(short, vec![full[0], full[1], full[3]]);
        }
    }
}
