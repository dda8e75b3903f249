//! Card catalog and the five archetype deck lists.
//!
//! Both ship as TOML data files under `data/` and are embedded at compile
//! time. Cards are addressed by a dense [`CardId`] assigned in file order, so
//! the observation one-hot and the catalog export agree on indices.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_CATALOG: &str = include_str!("../data/catalog.toml");
const BUNDLED_DECKS: &str = include_str!("../data/decks.toml");

/// Catalog schema version understood by this build.
pub const CATALOG_SCHEMA_VERSION: u32 = 1;

/// Number of cards in the bundled pool.
pub const POOL_SIZE: usize = 56;

/// Required deck size.
pub const DECK_SIZE: usize = 60;

#[derive(Debug, Error)]
pub enum CardError {
    #[error("catalog parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported catalog schema version {0}")]
    SchemaVersion(u32),
    #[error("duplicate card id `{0}`")]
    DuplicateId(String),
    #[error("card `{id}`: unknown kind `{kind}`")]
    UnknownKind { id: String, kind: String },
    #[error("card `{id}`: unknown color `{color}`")]
    UnknownColor { id: String, color: String },
    #[error("card `{id}`: unknown keyword `{keyword}`")]
    UnknownKeyword { id: String, keyword: String },
    #[error("creature `{0}` is missing power or toughness")]
    MissingStats(String),
    #[error("non-creature `{0}` has power or toughness")]
    UnexpectedStats(String),
    #[error("land `{0}` has a non-zero cost")]
    LandWithCost(String),
    #[error("card `{id}`: {reason}")]
    InconsistentFlags { id: String, reason: String },
    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),
    #[error("deck `{deck}` references card `{card}` missing from the catalog")]
    MissingCard { deck: String, card: String },
    #[error("deck `{deck}` has {total} cards, expected 60")]
    DeckSize { deck: String, total: usize },
    #[error("deck `{deck}` has a zero-count entry for `{card}`")]
    ZeroCount { deck: String, card: String },
    #[error("no list for archetype `{0}`")]
    MissingDeck(String),
}

/// Dense catalog index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CardId(pub u16);

impl CardId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardKind {
    Land,
    Creature,
    Instant,
    Sorcery,
    Enchantment,
    Planeswalker,
}

impl FromStr for CardKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "land" => CardKind::Land,
            "creature" => CardKind::Creature,
            "instant" => CardKind::Instant,
            "sorcery" => CardKind::Sorcery,
            "enchantment" => CardKind::Enchantment,
            "planeswalker" => CardKind::Planeswalker,
            _ => return Err(()),
        })
    }
}

/// The five colors, in WUBRG order. The discriminant is the array index used
/// by [`ManaCost::pips`] and by the observation color features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    W = 0,
    U = 1,
    B = 2,
    R = 3,
    G = 4,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::W, Color::U, Color::B, Color::R, Color::G];

    pub fn index(self) -> usize {
        self as usize
    }

    fn parse(s: &str) -> Option<Color> {
        Some(match s {
            "W" => Color::W,
            "U" => Color::U,
            "B" => Color::B,
            "R" => Color::R,
            "G" => Color::G,
            _ => return None,
        })
    }
}

/// A set of colors packed as bits in WUBRG order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorSet(pub u8);

impl ColorSet {
    pub fn contains(self, c: Color) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn insert(&mut self, c: Color) {
        self.0 |= 1 << c.index();
    }

    pub fn union(self, other: ColorSet) -> ColorSet {
        ColorSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn single(c: Color) -> ColorSet {
        ColorSet(1 << c.index())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManaCost {
    pub generic: u8,
    /// Colored pips indexed by [`Color::index`].
    pub pips: [u8; 5],
}

impl ManaCost {
    pub fn total(&self) -> u32 {
        self.generic as u32 + self.pips.iter().map(|&p| p as u32).sum::<u32>()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    /// Colors with at least one pip.
    pub fn colors(&self) -> ColorSet {
        let mut set = ColorSet::default();
        for c in Color::ALL {
            if self.pips[c.index()] > 0 {
                set.insert(c);
            }
        }
        set
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Keywords {
    pub haste: bool,
    pub flash: bool,
    pub lifelink: bool,
}

/// What a targeted effect may point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// Any creature or either player.
    AnyTarget,
    /// Any creature.
    Creature,
    /// Creature whose power plus toughness is at most the bound.
    CreatureMaxStats(i32),
    /// Every creature on the battlefield; no target choice.
    AllCreatures,
    /// An opponent's nonland permanent.
    OpponentNonlandPermanent,
}

impl TargetSpec {
    /// True when the effect needs a TARGET decision.
    pub fn is_chosen(self) -> bool {
        !matches!(self, TargetSpec::AllCreatures)
    }
}

/// The closed set of effect primitives every card maps onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    DealDamage { amount: i32, target: TargetSpec },
    Destroy { target: TargetSpec },
    Counter,
    Draw { count: u32 },
    GainLife { amount: i32 },
    CreateToken {
        power: i32,
        toughness: i32,
        count: u32,
        /// Created by an ACTIVATE decision rather than on entering.
        #[serde(default)]
        activated: bool,
    },
    Pump { power: i32, toughness: i32, target: TargetSpec },
    AddMana {
        /// Puts a land from the library onto the battlefield instead of
        /// being a static mana ability.
        #[serde(default)]
        ramp: bool,
    },
    CostReductionConvoke,
    StaticProwessTrigger,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CardFlags {
    pub is_threat: bool,
    pub is_removal: bool,
    pub mana_producer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardDef {
    pub id: String,
    pub name: String,
    pub kind: CardKind,
    pub cost: ManaCost,
    pub power: Option<i32>,
    pub toughness: Option<i32>,
    pub keywords: Keywords,
    /// Colors of mana this card produces when tapped (lands, mana creatures).
    pub produces: ColorSet,
    pub effects: Vec<Effect>,
    pub flags: CardFlags,
    pub note: String,
}

impl CardDef {
    pub fn is_creature(&self) -> bool {
        self.kind == CardKind::Creature
    }

    pub fn is_land(&self) -> bool {
        self.kind == CardKind::Land
    }

    /// Permanent cards stay on the battlefield after resolving.
    pub fn is_permanent(&self) -> bool {
        matches!(
            self.kind,
            CardKind::Land | CardKind::Creature | CardKind::Enchantment | CardKind::Planeswalker
        )
    }

    /// Castable outside sorcery timing.
    pub fn has_instant_timing(&self) -> bool {
        self.kind == CardKind::Instant || self.keywords.flash
    }

    pub fn has_convoke(&self) -> bool {
        self.effects.contains(&Effect::CostReductionConvoke)
    }

    pub fn has_prowess(&self) -> bool {
        self.effects.contains(&Effect::StaticProwessTrigger)
    }

    pub fn is_counterspell(&self) -> bool {
        self.effects.contains(&Effect::Counter)
    }

    /// The single chosen target of this card's effects, if any.
    pub fn chosen_target(&self) -> Option<TargetSpec> {
        self.effects.iter().find_map(|e| match *e {
            Effect::DealDamage { target, .. }
            | Effect::Destroy { target }
            | Effect::Pump { target, .. }
                if target.is_chosen() =>
            {
                Some(target)
            }
            _ => None,
        })
    }

    /// Token created by an ACTIVATE decision, if this permanent has one.
    pub fn activated_token(&self) -> Option<(i32, i32, u32)> {
        self.effects.iter().find_map(|e| match *e {
            Effect::CreateToken { power, toughness, count, activated: true } => {
                Some((power, toughness, count))
            }
            _ => None,
        })
    }

    /// Colors for convoke and observation: the cost's pip colors.
    pub fn colors(&self) -> ColorSet {
        self.cost.colors()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    schema_version: u32,
    #[serde(default)]
    card: Vec<RawCard>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    #[serde(default)]
    generic: u8,
    #[serde(default)]
    pips: BTreeMap<String, u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCard {
    id: String,
    name: String,
    kind: String,
    cost: Option<RawCost>,
    power: Option<i32>,
    toughness: Option<i32>,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default)]
    produces: Vec<String>,
    #[serde(default)]
    effects: Vec<Effect>,
    flags: CardFlags,
    #[serde(default)]
    note: String,
}

impl RawCard {
    fn into_def(self) -> Result<CardDef, CardError> {
        let kind = CardKind::from_str(&self.kind).map_err(|_| CardError::UnknownKind {
            id: self.id.clone(),
            kind: self.kind.clone(),
        })?;
        let mut cost = ManaCost::default();
        if let Some(raw) = &self.cost {
            cost.generic = raw.generic;
            for (color, n) in &raw.pips {
                let c = Color::parse(color).ok_or_else(|| CardError::UnknownColor {
                    id: self.id.clone(),
                    color: color.clone(),
                })?;
                cost.pips[c.index()] = *n;
            }
        }
        let mut produces = ColorSet::default();
        for color in &self.produces {
            let c = Color::parse(color).ok_or_else(|| CardError::UnknownColor {
                id: self.id.clone(),
                color: color.clone(),
            })?;
            produces.insert(c);
        }
        let mut keywords = Keywords::default();
        for kw in &self.keywords {
            match kw.as_str() {
                "haste" => keywords.haste = true,
                "flash" => keywords.flash = true,
                "lifelink" => keywords.lifelink = true,
                _ => {
                    return Err(CardError::UnknownKeyword {
                        id: self.id.clone(),
                        keyword: kw.clone(),
                    })
                }
            }
        }

        let def = CardDef {
            id: self.id,
            name: self.name,
            kind,
            cost,
            power: self.power,
            toughness: self.toughness,
            keywords,
            produces,
            effects: self.effects,
            flags: self.flags,
            note: self.note,
        };
        validate_card(&def)?;
        Ok(def)
    }
}

fn validate_card(def: &CardDef) -> Result<(), CardError> {
    let id = &def.id;
    if def.is_creature() {
        if def.power.is_none() || def.toughness.is_none() {
            return Err(CardError::MissingStats(id.clone()));
        }
    } else if def.power.is_some() || def.toughness.is_some() {
        return Err(CardError::UnexpectedStats(id.clone()));
    }
    if def.is_land() && !def.cost.is_zero() {
        return Err(CardError::LandWithCost(id.clone()));
    }
    let inconsistent = |reason: &str| CardError::InconsistentFlags {
        id: id.clone(),
        reason: reason.to_string(),
    };
    let threat_kind = matches!(def.kind, CardKind::Creature | CardKind::Planeswalker);
    if def.flags.is_threat != threat_kind {
        return Err(inconsistent("is_threat must equal creature-or-planeswalker"));
    }
    let taps_for_mana = def
        .effects
        .iter()
        .any(|e| matches!(e, Effect::AddMana { ramp: false }));
    if def.flags.mana_producer != taps_for_mana {
        return Err(inconsistent("mana_producer must match a static add_mana effect"));
    }
    if taps_for_mana && def.produces.is_empty() {
        return Err(inconsistent("mana producer without produced colors"));
    }
    if def.is_land() && !def.flags.mana_producer {
        return Err(inconsistent("lands must produce mana"));
    }
    Ok(())
}

/// The immutable card pool.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub schema_version: u32,
    cards: Vec<CardDef>,
    by_id: HashMap<String, CardId>,
}

impl Catalog {
    /// The catalog embedded in the crate, parsed once and shared.
    pub fn bundled() -> Arc<Catalog> {
        static BUNDLED: OnceLock<Arc<Catalog>> = OnceLock::new();
        BUNDLED
            .get_or_init(|| Arc::new(load_catalog(BUNDLED_CATALOG).expect("bundled catalog is valid")))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn get(&self, id: CardId) -> &CardDef {
        &self.cards[id.index()]
    }

    pub fn lookup(&self, id: &str) -> Option<CardId> {
        self.by_id.get(id).copied()
    }

    pub fn cards(&self) -> impl Iterator<Item = (CardId, &CardDef)> {
        self.cards
            .iter()
            .enumerate()
            .map(|(i, c)| (CardId(i as u16), c))
    }

    /// Source text of the bundled catalog, for export.
    pub fn bundled_source() -> &'static str {
        BUNDLED_CATALOG
    }
}

/// Parse and validate a catalog document.
pub fn load_catalog(document: &str) -> Result<Catalog, CardError> {
    let raw: RawCatalog = toml::from_str(document)?;
    if raw.schema_version != CATALOG_SCHEMA_VERSION {
        return Err(CardError::SchemaVersion(raw.schema_version));
    }
    let mut cards = Vec::with_capacity(raw.card.len());
    let mut by_id = HashMap::new();
    for rc in raw.card {
        if by_id.contains_key(&rc.id) {
            return Err(CardError::DuplicateId(rc.id));
        }
        let def = rc.into_def()?;
        by_id.insert(def.id.clone(), CardId(cards.len() as u16));
        cards.push(def);
    }
    Ok(Catalog { schema_version: raw.schema_version, cards, by_id })
}

/// Annotation flags of a card. Pure lookup.
pub fn classify(card: &CardDef) -> CardFlags {
    card.flags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    MonoRedAggro,
    AzoriusControl,
    DimirMidrange,
    DomainRamp,
    BorosConvoke,
}

impl Archetype {
    pub const ALL: [Archetype; 5] = [
        Archetype::MonoRedAggro,
        Archetype::AzoriusControl,
        Archetype::DimirMidrange,
        Archetype::DomainRamp,
        Archetype::BorosConvoke,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::MonoRedAggro => "mono_red_aggro",
            Archetype::AzoriusControl => "azorius_control",
            Archetype::DimirMidrange => "dimir_midrange",
            Archetype::DomainRamp => "domain_ramp",
            Archetype::BorosConvoke => "boros_convoke",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Archetype::MonoRedAggro => "Mono-Red Aggro",
            Archetype::AzoriusControl => "Azorius Control",
            Archetype::DimirMidrange => "Dimir Midrange",
            Archetype::DomainRamp => "Domain Ramp",
            Archetype::BorosConvoke => "Boros Convoke",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Archetype {
    type Err = CardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Archetype::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| CardError::UnknownArchetype(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deck {
    pub archetype: Archetype,
    pub entries: Vec<(CardId, u32)>,
}

impl Deck {
    pub fn total(&self) -> usize {
        self.entries.iter().map(|&(_, n)| n as usize).sum()
    }

    /// The 60 card instances in list order.
    pub fn cards(&self) -> Vec<CardId> {
        let mut out = Vec::with_capacity(self.total());
        for &(id, n) in &self.entries {
            out.extend(std::iter::repeat_n(id, n as usize));
        }
        out
    }

    pub fn count_of(&self, id: CardId) -> u32 {
        self.entries
            .iter()
            .filter(|(c, _)| *c == id)
            .map(|&(_, n)| n)
            .sum()
    }

    /// Check the 60-card total and non-zero counts.
    pub fn validate(&self) -> Result<(), CardError> {
        let total = self.total();
        if total != DECK_SIZE {
            return Err(CardError::DeckSize { deck: self.archetype.to_string(), total });
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecks {
    schema_version: u32,
    deck: Vec<RawDeck>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeck {
    archetype: String,
    #[allow(dead_code)]
    name: String,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    card: String,
    count: u32,
}

/// Parse a deck-list document against a catalog, validating every list.
pub fn load_decks(document: &str, catalog: &Catalog) -> Result<Vec<Deck>, CardError> {
    let raw: RawDecks = toml::from_str(document)?;
    if raw.schema_version != CATALOG_SCHEMA_VERSION {
        return Err(CardError::SchemaVersion(raw.schema_version));
    }
    let mut decks = Vec::with_capacity(raw.deck.len());
    for rd in raw.deck {
        let archetype = Archetype::from_str(&rd.archetype)?;
        let mut entries = Vec::with_capacity(rd.entries.len());
        for e in rd.entries {
            let id = catalog.lookup(&e.card).ok_or_else(|| CardError::MissingCard {
                deck: rd.archetype.clone(),
                card: e.card.clone(),
            })?;
            if e.count == 0 {
                return Err(CardError::ZeroCount { deck: rd.archetype.clone(), card: e.card });
            }
            entries.push((id, e.count));
        }
        let deck = Deck { archetype, entries };
        deck.validate()?;
        decks.push(deck);
    }
    Ok(decks)
}

/// Source text of the bundled deck lists, for export.
pub fn bundled_decks_source() -> &'static str {
    BUNDLED_DECKS
}

/// The fixed list for an archetype drawn from the bundled deck file.
pub fn deck_for(archetype: Archetype, catalog: &Catalog) -> Result<Deck, CardError> {
    load_decks(BUNDLED_DECKS, catalog)?
        .into_iter()
        .find(|d| d.archetype == archetype)
        .ok_or_else(|| CardError::MissingDeck(archetype.to_string()))
}

/// Like [`deck_for`] but takes the archetype by name.
pub fn deck_by_name(name: &str, catalog: &Catalog) -> Result<Deck, CardError> {
    deck_for(Archetype::from_str(name)?, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog_has_pool_size() {
        let cat = Catalog::bundled();
        assert_eq!(cat.len(), POOL_SIZE);
    }

    #[test]
    fn duplicate_id_rejected() {
        let doc = r#"
schema_version = 1
[[card]]
id = "x"
name = "X"
kind = "land"
produces = ["R"]
effects = [{ type = "add_mana" }]
flags = { is_threat = false, is_removal = false, mana_producer = true }
[[card]]
id = "x"
name = "X again"
kind = "land"
produces = ["R"]
effects = [{ type = "add_mana" }]
flags = { is_threat = false, is_removal = false, mana_producer = true }
"#;
        assert!(matches!(load_catalog(doc), Err(CardError::DuplicateId(id)) if id == "x"));
    }

    #[test]
    fn creature_without_toughness_rejected() {
        let doc = r#"
schema_version = 1
[[card]]
id = "bear"
name = "Bear"
kind = "creature"
cost = { generic = 1, pips = { G = 1 } }
power = 2
flags = { is_threat = true, is_removal = false, mana_producer = false }
"#;
        assert!(matches!(load_catalog(doc), Err(CardError::MissingStats(_))));
    }

    #[test]
    fn unknown_kind_rejected() {
        let doc = r#"
schema_version = 1
[[card]]
id = "relic"
name = "Relic"
kind = "artifact"
flags = { is_threat = false, is_removal = false, mana_producer = false }
"#;
        assert!(matches!(load_catalog(doc), Err(CardError::UnknownKind { .. })));
    }

    #[test]
    fn mono_red_list() {
        let cat = Catalog::bundled();
        let deck = deck_for(Archetype::MonoRedAggro, &cat).unwrap();
        assert_eq!(deck.count_of(cat.lookup("mountain").unwrap()), 20);
        assert_eq!(deck.count_of(cat.lookup("monastery_swiftspear").unwrap()), 4);
    }

    #[test]
    fn unknown_archetype() {
        let cat = Catalog::bundled();
        assert!(matches!(deck_by_name("Jund", &cat), Err(CardError::UnknownArchetype(_))));
        assert_eq!("Mono-Red Aggro".parse::<Archetype>().unwrap(), Archetype::MonoRedAggro);
    }

    #[test]
    fn classify_examples() {
        let cat = Catalog::bundled();
        let flags = |id: &str| classify(cat.get(cat.lookup(id).unwrap()));
        assert!(flags("mountain").mana_producer);
        assert!(flags("go_for_the_throat").is_removal);
        assert!(flags("llanowar_elves").mana_producer);
        assert!(!flags("opt").is_removal);
    }
}
