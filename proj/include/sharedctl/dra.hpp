#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sharedctl {

/// A letter of 2^AP encoded as a bitmask over the automaton's AP list order.
using Letter = std::uint32_t;
using AutomatonState = std::uint32_t;

/// Rabin pair over automaton states: accepting runs eventually avoid `avoid`
/// forever and visit `visit` infinitely often.
struct RabinPair {
    std::vector<char> avoid;
    std::vector<char> visit;
};

/**
 * Deterministic Rabin automaton over the alphabet 2^AP. The transition
 * function is total: `next(q, letter)` is defined for every state and every
 * letter. The order of the AP list is significant since it fixes the bit
 * assigned to every proposition.
 */
class Dra {
public:
    static constexpr std::size_t kMaxPropositions = 16;

    Dra() = default;
    /// `delta[q][letter]` is the successor of q; must cover all 2^|ap| letters.
    Dra(std::vector<std::string> ap, AutomatonState initial,
        std::vector<std::vector<AutomatonState>> delta, std::vector<RabinPair> pairs);

    const std::vector<std::string>& propositions() const noexcept { return ap_; }
    std::size_t num_states() const noexcept { return delta_.size(); }
    std::size_t num_letters() const noexcept { return std::size_t{1} << ap_.size(); }
    AutomatonState initial() const noexcept { return initial_; }
    const std::vector<RabinPair>& pairs() const noexcept { return pairs_; }

    AutomatonState next(AutomatonState q, Letter letter) const { return delta_[q][letter]; }

    /// Letter whose bits are the propositions of this automaton found in `labels`.
    Letter letter_of(std::span<const std::string> labels) const;
    /// Letter from a list of proposition names; throws UnknownAp for foreign names.
    Letter make_letter(std::span<const std::string> props) const;

private:
    std::vector<std::string> ap_;
    AutomatonState initial_ = 0;
    std::vector<std::vector<AutomatonState>> delta_;
    std::vector<RabinPair> pairs_;
};

/// `!avoid U target`, with avoid taking precedence when both hold.
struct ReachAvoid {
    std::vector<std::string> avoid;
    std::string target;
};

/// Visit the waypoints in order while never seeing an avoid proposition.
struct SequencedVisits {
    std::vector<std::string> waypoints;
    std::vector<std::string> avoid;
};

struct SpecTemplate {
    std::variant<ReachAvoid, SequencedVisits> kind;
    double threshold = 0.0;
};

/**
 * Builds the automaton of a specification template over `ap`.
 *
 * reach_avoid: states {live = 0, accept = 1, reject = 2}, one pair
 * (A = {reject}, B = {accept}). sequenced_visits with k waypoints: stages
 * 0..k-1, accept = k, reject = k + 1; a letter may complete several
 * consecutive waypoints at once.
 */
Dra template_to_dra(const SpecTemplate& spec, std::span<const std::string> ap);

/// Acceptance of the ultimately periodic word prefix . cycle^omega.
bool dra_accepts_lasso(const Dra& dra, std::span<const Letter> prefix,
                       std::span<const Letter> cycle);

/// Parses the line-oriented automaton format (see docs/formats.md).
Dra parse_dra(std::istream& in);
Dra load_dra(const std::string& path);
void write_dra(const Dra& dra, std::ostream& out);

/// Parses "reach_avoid:avoid1,avoid2:target" or "sequence:w1,w2[:avoid1,...]".
SpecTemplate parse_template(const std::string& text, double threshold = 0.0);

} // namespace sharedctl
