//! Combat damage.

use super::{EventLog, GameState};

impl GameState {
    /// Deal combat damage for the declared attackers and blockers, then move
    /// dead creatures to the graveyard and clear combat flags.
    ///
    /// Damage is simultaneous. An attacker blocked by several creatures
    /// assigns lethal damage to each blocker in declaration order before
    /// moving on; leftover damage stays on the last blocker.
    pub fn resolve_combat(&mut self, ev: &mut EventLog) {
        let cat = self.catalog_arc();
        let atk = self.active_player;
        let def = 1 - atk;

        // (side, ordinal, amount) damage to creatures, computed before any
        // of it is applied.
        let mut creature_damage: Vec<(usize, u32, i32)> = Vec::new();
        let mut face_damage = 0;
        let mut lifelink_gain = [0i32; 2];

        let attackers: Vec<_> = self.players[atk]
            .battlefield
            .iter()
            .filter(|p| p.attacking)
            .cloned()
            .collect();
        for a in &attackers {
            let power = a.power(&cat).max(0);
            let blockers: Vec<_> = self.players[def]
                .battlefield
                .iter()
                .filter(|b| b.blocking == Some(a.ordinal))
                .cloned()
                .collect();
            if blockers.is_empty() {
                face_damage += power;
                if a.has_lifelink(&cat) {
                    lifelink_gain[atk] += power;
                }
                continue;
            }
            let mut left = power;
            for (i, b) in blockers.iter().enumerate() {
                let lethal = (b.toughness(&cat) - b.damage_marked).max(0);
                let dealt = if i + 1 == blockers.len() { left } else { left.min(lethal) };
                if dealt > 0 {
                    creature_damage.push((def, b.ordinal, dealt));
                    left -= dealt;
                }
            }
            if a.has_lifelink(&cat) {
                lifelink_gain[atk] += power;
            }
            for b in &blockers {
                let bp = b.power(&cat).max(0);
                if bp > 0 {
                    creature_damage.push((atk, a.ordinal, bp));
                    if b.has_lifelink(&cat) {
                        lifelink_gain[def] += bp;
                    }
                }
            }
        }

        for (side, ordinal, amount) in creature_damage {
            if let Some(p) = self.players[side].permanent_mut(ordinal) {
                p.damage_marked += amount;
            }
        }
        if face_damage > 0 {
            self.players[def].life -= face_damage;
            ev.damage_taken[def] += face_damage;
        }
        for side in 0..2 {
            if lifelink_gain[side] > 0 {
                self.players[side].life += lifelink_gain[side];
                ev.life_gained[side] += lifelink_gain[side];
            }
        }
        self.state_based_actions(ev);
        for ps in self.players.iter_mut() {
            for p in ps.battlefield.iter_mut() {
                p.attacking = false;
                p.blocking = None;
            }
        }
    }
}
