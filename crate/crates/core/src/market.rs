//! Uniform-price double-auction primitives: tariffs, orders, books, and
//! market clearing.
//!
//! Clearing is price-priority with a single uniform price. All orders on the
//! profitable side of the clearing price are eligible; the shorter side is
//! filled completely and the longer side is filled best-price-first, with the
//! price level that straddles the cut split pro rata.

use crate::error::{Error, Result};
use crate::price::Price;
use crate::AgentId;
use serde::{Deserialize, Serialize};

/// Retail tariff band the platform trades inside.
///
/// `buy` is what an agent pays the main grid per kWh (upper bound for any
/// local price), `sell` is what the main grid pays for exports (lower bound).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tariff {
    pub buy: Price,
    pub sell: Price,
}

impl Tariff {
    pub fn new(buy: Price, sell: Price) -> Result<Tariff> {
        if sell <= Price::ZERO || buy <= sell {
            return Err(Error::Config(format!(
                "tariff must satisfy buy > sell > 0, got buy {buy}, sell {sell}"
            )));
        }
        Ok(Tariff { buy, sell })
    }

    /// The default UK-style retail band: import 18.9 p/kWh, export 3.2 p/kWh.
    pub fn default_band() -> Tariff {
        Tariff {
            buy: Price::from_millipence(18_900),
            sell: Price::from_millipence(3_200),
        }
    }

    pub fn midpoint(&self) -> Price {
        Price::midpoint(self.buy, self.sell)
    }

    pub fn contains(&self, price: Price) -> bool {
        self.sell <= price && price <= self.buy
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

/// A single-period limit order for `quantity` watt-hours.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub owner: AgentId,
    pub side: Side,
    pub price: Price,
    pub quantity: u64,
}

impl Order {
    /// Orders must beat the tariff on their own side: buying locally only
    /// makes sense below the grid import price, selling only above the grid
    /// export price.
    pub fn validate(&self, tariff: &Tariff) -> Result<()> {
        let ok = self.quantity > 0
            && self.price > Price::ZERO
            && match self.side {
                Side::Buy => self.price < tariff.buy,
                Side::Sell => self.price > tariff.sell,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid {:?} order from {}: {} p/kWh x {} Wh outside tariff band ({}, {})",
                self.side, self.owner, self.price, self.quantity, tariff.sell, tariff.buy
            )))
        }
    }
}

/// Order book for one auction round. Buys are kept sorted by descending
/// price, sells by ascending price; ties break on agent id so results never
/// depend on insertion order.
#[derive(Clone, Debug)]
pub struct OrderBook {
    tariff: Tariff,
    buys: Vec<Order>,
    sells: Vec<Order>,
}

impl OrderBook {
    pub fn new(tariff: Tariff) -> OrderBook {
        OrderBook {
            tariff,
            buys: Vec::new(),
            sells: Vec::new(),
        }
    }

    pub fn insert(&mut self, order: Order) -> Result<()> {
        order.validate(&self.tariff)?;
        match order.side {
            Side::Buy => {
                let key = (std::cmp::Reverse(order.price), &order.owner);
                let at = self
                    .buys
                    .partition_point(|o| (std::cmp::Reverse(o.price), &o.owner) < key);
                self.buys.insert(at, order);
            }
            Side::Sell => {
                let at = self
                    .sells
                    .partition_point(|o| (o.price, &o.owner) < (order.price, &order.owner));
                self.sells.insert(at, order);
            }
        }
        Ok(())
    }

    pub fn tariff(&self) -> &Tariff {
        &self.tariff
    }

    /// Buy orders, best (highest) price first.
    pub fn buys(&self) -> &[Order] {
        &self.buys
    }

    /// Sell orders, best (lowest) price first.
    pub fn sells(&self) -> &[Order] {
        &self.sells
    }

    pub fn demand_wh(&self) -> u64 {
        self.buys.iter().map(|o| o.quantity).sum()
    }

    pub fn supply_wh(&self) -> u64 {
        self.sells.iter().map(|o| o.quantity).sum()
    }

    pub fn is_crossing(&self) -> bool {
        match (self.buys.first(), self.sells.first()) {
            (Some(b), Some(s)) => b.price >= s.price,
            _ => false,
        }
    }
}

/// Which pair of quotes the market clearing price averages.
///
/// `Prose` takes the best quotes (highest buy, lowest sell); `Formula` takes
/// the worst (lowest buy, highest sell). Both appear in the literature this
/// simulator follows; `Prose` is the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McpRule {
    #[default]
    Prose,
    Formula,
}

/// Midpoint clearing price of a book with at least one order per side.
pub fn compute_mcp(book: &OrderBook, rule: McpRule) -> Result<Price> {
    let (buy, sell) = match rule {
        McpRule::Prose => (book.buys.first(), book.sells.first()),
        McpRule::Formula => (book.buys.last(), book.sells.last()),
    };
    let buy = buy.ok_or(Error::EmptySide { side: Side::Buy })?;
    let sell = sell.ok_or(Error::EmptySide { side: Side::Sell })?;
    Ok(Price::midpoint(buy.price, sell.price))
}

/// One buyer-seller fill at the uniform clearing price.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub buyer: AgentId,
    pub seller: AgentId,
    pub wh: u64,
    pub price: Price,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub mcp: Price,
    pub allocations: Vec<Allocation>,
    /// Demand left unserved, including buy orders priced below the MCP.
    pub unmatched_demand_wh: u64,
    /// Supply left unsold, including sell orders priced above the MCP.
    pub unmatched_supply_wh: u64,
}

impl ClearingResult {
    pub fn matched_wh(&self) -> u64 {
        self.allocations.iter().map(|a| a.wh).sum()
    }
}

/// Clears a book at a uniform price.
///
/// Buy orders with `price >= mcp` and sell orders with `price <= mcp` are
/// eligible; the matched quantity is the smaller eligible side. Fills go
/// best price first; a price level that straddles the remaining quota is
/// split pro rata (round down, spare units to the lowest agent ids).
pub fn clear_uniform(book: &OrderBook, mcp: Price) -> ClearingResult {
    let eligible_buys: Vec<&Order> = book.buys.iter().filter(|o| o.price >= mcp).collect();
    let eligible_sells: Vec<&Order> = book.sells.iter().filter(|o| o.price <= mcp).collect();

    let eligible_demand: u64 = eligible_buys.iter().map(|o| o.quantity).sum();
    let eligible_supply: u64 = eligible_sells.iter().map(|o| o.quantity).sum();
    let matched = eligible_demand.min(eligible_supply);

    let buy_fills = fill_side(&eligible_buys, matched);
    let sell_fills = fill_side(&eligible_sells, matched);
    let allocations = zip_fills(&buy_fills, &sell_fills, mcp);

    ClearingResult {
        mcp,
        allocations,
        unmatched_demand_wh: book.demand_wh() - matched,
        unmatched_supply_wh: book.supply_wh() - matched,
    }
}

/// Fills orders against a quota in book order. Levels that fit entirely are
/// taken whole; the level that straddles the quota is split pro rata with
/// floor rounding, and leftover units go one at a time to the lowest agent
/// ids with spare capacity.
fn fill_side(orders: &[&Order], quota: u64) -> Vec<(AgentId, u64)> {
    let mut fills = Vec::new();
    let mut left = quota;
    let mut i = 0;
    while i < orders.len() && left > 0 {
        let level_price = orders[i].price;
        let mut j = i;
        while j < orders.len() && orders[j].price == level_price {
            j += 1;
        }
        let level = &orders[i..j];
        let level_qty: u64 = level.iter().map(|o| o.quantity).sum();

        if level_qty <= left {
            for o in level {
                fills.push((o.owner.clone(), o.quantity));
            }
            left -= level_qty;
        } else {
            let mut shares: Vec<(AgentId, u64, u64)> = level
                .iter()
                .map(|o| {
                    let share = (left as u128 * o.quantity as u128 / level_qty as u128) as u64;
                    (o.owner.clone(), share, o.quantity)
                })
                .collect();
            let mut spare = left - shares.iter().map(|s| s.1).sum::<u64>();
            // Orders within a level are already sorted by agent id.
            for share in shares.iter_mut() {
                if spare == 0 {
                    break;
                }
                let take = spare.min(share.2 - share.1);
                share.1 += take;
                spare -= take;
            }
            fills.extend(
                shares
                    .into_iter()
                    .filter(|s| s.1 > 0)
                    .map(|(owner, wh, _)| (owner, wh)),
            );
            left = 0;
        }
        i = j;
    }
    fills
}

/// Pairs buy fills with sell fills two-pointer style; both lists sum to the
/// same total, so every unit ends up in exactly one allocation.
fn zip_fills(buys: &[(AgentId, u64)], sells: &[(AgentId, u64)], price: Price) -> Vec<Allocation> {
    let mut allocations = Vec::new();
    let mut bi = 0;
    let mut si = 0;
    let mut b_left = buys.first().map_or(0, |f| f.1);
    let mut s_left = sells.first().map_or(0, |f| f.1);
    while bi < buys.len() && si < sells.len() {
        let wh = b_left.min(s_left);
        if wh > 0 {
            allocations.push(Allocation {
                buyer: buys[bi].0.clone(),
                seller: sells[si].0.clone(),
                wh,
                price,
            });
        }
        b_left -= wh;
        s_left -= wh;
        if b_left == 0 {
            bi += 1;
            b_left = buys.get(bi).map_or(0, |f| f.1);
        }
        if s_left == 0 {
            si += 1;
            s_left = sells.get(si).map_or(0, |f| f.1);
        }
    }
    allocations
}
