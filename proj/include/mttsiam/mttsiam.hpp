#pragma once

// Everything except the command-line front end.

#include "mttsiam/ablation.hpp"
#include "mttsiam/candidate_selector.hpp"
#include "mttsiam/combinet.hpp"
#include "mttsiam/config.hpp"
#include "mttsiam/corpus.hpp"
#include "mttsiam/error.hpp"
#include "mttsiam/eval_harness.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/score_fusion.hpp"
#include "mttsiam/settings.hpp"
#include "mttsiam/synthetic_world.hpp"
#include "mttsiam/template_bag.hpp"
#include "mttsiam/text.hpp"
#include "mttsiam/tracking_pipeline.hpp"
