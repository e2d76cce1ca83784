#pragma once

#include "spade/error.hpp"
#include "spade/json_fields.hpp"
#include "spade/domain.hpp"
#include "spade/digest.hpp"
#include "spade/prompt.hpp"
#include "spade/codec.hpp"
#include "spade/run_record.hpp"
#include "spade/metrics.hpp"
#include "spade/sim.hpp"
#include "spade/provider.hpp"
#include "spade/pipeline.hpp"
#include "spade/store.hpp"
#include "spade/service.hpp"
