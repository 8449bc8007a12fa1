#pragma once

#include <iosfwd>
#include <string>

#include "twtoa/campaign.hpp"

namespace twtoa
{

/// Plain-text `key = value` campaign configuration. Lists are comma separated,
/// '#' starts a comment, unknown keys are errors. Keys not present keep the
/// value of `base`. print_config writes every key, so its output parses back to
/// the same configuration.
CampaignConfig parse_config(std::istream& in, const CampaignConfig& base = {});
CampaignConfig load_config(const std::string& path, const CampaignConfig& base = {});
void print_config(const CampaignConfig& config, std::ostream& out);

}  // namespace twtoa
