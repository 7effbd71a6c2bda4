#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "policyprobe/transport.hpp"

namespace policyprobe::cli {

// Test seams: inject a transport (e.g. a counting mock asserting that no
// network client is ever constructed) and capture output streams.
struct CliDeps {
    std::shared_ptr<HttpTransport> transport_override;
    std::ostream* out = nullptr;  // defaults to std::cout
    std::ostream* err = nullptr;  // defaults to std::cerr
};

// Subcommands: ingest, split, analyze, evaluate, abtest, audit, estimate,
// export-finetune. Returns 0 on success, 1 on domain errors, 2 on usage
// errors. Machine-readable output goes to files, the human summary to
// stdout, diagnostics to stderr.
int run(const std::vector<std::string>& args, const CliDeps& deps = {});

}  // namespace policyprobe::cli
