#pragma once

#include "scaseg/attention.hpp"

// Reference attention evaluated with explicit scalar loops. Shares no code
// with the kernel path; used only to check it.
namespace scaseg::oracle {

AttnOutput oracle_attention(const Tensor& xq, const Tensor& xkv, const VanillaAttnParams& p);
AttnOutput oracle_strip_attention(const Tensor& xq, const Tensor& xkv, const SCAParams& p);

}  // namespace scaseg::oracle
