#pragma once

#include "pcreg/actions.hpp"
#include "pcreg/cloud.hpp"
#include "pcreg/dse.hpp"
#include "pcreg/extractor.hpp"
#include "pcreg/featnet.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/io.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/oracle.hpp"
#include "pcreg/pointlk.hpp"
#include "pcreg/quant.hpp"
#include "pcreg/reagent.hpp"
#include "pcreg/result.hpp"
#include "pcreg/synthetic.hpp"
