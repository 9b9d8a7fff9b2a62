//! `signforge.toml` configuration. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use signforge::kinematics::{IkOptions, MirrorMap};
use signforge::lexicon::{CompileOptions, HandMapping, KeepOutRegion};
use signforge::robot_model::{build_chain, parse_urdf, PEPPER_BASE_LINK, PEPPER_RIGHT_TIP};
use signforge::sentence::{ComposeOptions, RestPosture};
use signforge::KinematicChain;

pub const CONFIG_ENV: &str = "SIGNFORGE_CONFIG";

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// URDF file; the bundled Pepper arm when absent.
    pub urdf: Option<PathBuf>,
    pub base_link: Option<String>,
    pub tip_link: Option<String>,
    pub lexicon_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// JSON array of `{source, target, sign}` entries.
    pub mirror_map: Option<PathBuf>,
    /// JSON `{min, max}` box.
    pub keepout: Option<PathBuf>,
    #[serde(default)]
    pub hand: Option<HandMapping>,
    pub fps: Option<u32>,
    pub strict: Option<bool>,
    #[serde(default)]
    pub ik: Option<IkOptions>,
    #[serde(default)]
    pub rest: Option<RestPosture>,
    pub port: Option<u16>,
    pub ui_dir: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: CliConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.urdf,
            &mut config.lexicon_dir,
            &mut config.out_dir,
            &mut config.mirror_map,
            &mut config.keepout,
            &mut config.ui_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Config named by `--config`, else by `SIGNFORGE_CONFIG`, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn chain(&self) -> Result<KinematicChain> {
        let base = self.base_link.as_deref().unwrap_or(PEPPER_BASE_LINK);
        let tip = self.tip_link.as_deref().unwrap_or(PEPPER_RIGHT_TIP);
        match &self.urdf {
            None if base == PEPPER_BASE_LINK && tip == PEPPER_RIGHT_TIP => Ok(KinematicChain::pepper_right_arm()),
            None => Ok(build_chain(&parse_urdf(signforge::robot_model::PEPPER_TWO_ARMS_URDF)?, base, tip)?),
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(build_chain(&parse_urdf(&text)?, base, tip)?)
            }
        }
    }

    pub fn mirror_map(&self) -> Result<MirrorMap> {
        match &self.mirror_map {
            None => Ok(MirrorMap::pepper_default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(MirrorMap::from_json(&text)?)
            }
        }
    }

    pub fn keepout(&self) -> Result<KeepOutRegion> {
        match &self.keepout {
            None => Ok(KeepOutRegion::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let region: KeepOutRegion = serde_json::from_str(&text)?;
                if KeepOutRegion::new(region.min, region.max).is_none() {
                    bail!("keep-out box in {} has min above max", path.display());
                }
                Ok(region)
            }
        }
    }

    pub fn compile_options(&self) -> Result<CompileOptions> {
        let mut options = CompileOptions { keepout: self.keepout()?, ..Default::default() };
        if let Some(fps) = self.fps {
            options.fps = fps;
        }
        if let Some(strict) = self.strict {
            options.strict = strict;
        }
        if let Some(ik) = &self.ik {
            options.ik = ik.clone();
        }
        if let Some(hand) = &self.hand {
            options.hand = hand.clone();
        }
        if options.fps == 0 {
            bail!("fps must be positive");
        }
        Ok(options)
    }

    pub fn compose_options(&self) -> ComposeOptions {
        ComposeOptions { rest: self.rest.clone().unwrap_or_default(), hand: self.hand.clone().unwrap_or_default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signforge.toml");
        std::fs::write(&path, "lexicon_dir = \"signs\"\nfps = 30\n[ik]\ntol_pos = 0.002\n").unwrap();
        let config = CliConfig::load(&path).unwrap();
        assert_eq!(config.lexicon_dir.unwrap(), dir.path().join("signs"));
        let options = CliConfig::load(&path).unwrap().compile_options().unwrap();
        assert_eq!((options.fps, options.ik.tol_pos, options.ik.max_restarts), (30, 0.002, 16));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(CliConfig::load(&path).is_err());
    }
}
