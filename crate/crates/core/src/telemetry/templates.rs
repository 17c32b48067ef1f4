use std::fmt::Write;

use chrono::DateTime;
use rand::Rng;

use super::{GreenKind, LogRecord, Origin};
use crate::actions::{EffectKind, Outcome};
use crate::topology::{NodeId, Topology};

/// 2024-01-01T00:00:00Z; one tick is one simulated hour.
const EPOCH_MS: i64 = 1_704_067_200_000;
const MS_PER_TICK: f64 = 3_600_000.0;

const GREEN_USERS: [&str; 8] = [
    "a.morgan", "j.ortiz", "k.nakamura", "l.fischer", "m.okafor", "p.silva", "r.chen", "s.haddad",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateKey {
    Action(EffectKind, Outcome),
    FirewallDrop,
    HoneytokenAlert,
    Green(GreenKind),
}

impl TemplateKey {
    pub fn origin(self) -> Origin {
        match self {
            TemplateKey::Action(kind, _) => match kind.team() {
                crate::state::Team::Red => Origin::Red,
                crate::state::Team::Blue => Origin::Blue,
            },
            TemplateKey::FirewallDrop | TemplateKey::HoneytokenAlert => Origin::System,
            TemplateKey::Green(_) => Origin::Green,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogDraft {
    pub node: NodeId,
    pub template: TemplateKey,
    /// Free-text finding substituted into templates that carry one.
    pub detail: Option<&'static str>,
}

const RED_KINDS: [EffectKind; 6] = [
    EffectKind::Scan,
    EffectKind::Exploit,
    EffectKind::PrivilegeEscalation,
    EffectKind::CredentialDump,
    EffectKind::LateralMove,
    EffectKind::Impact,
];

/// Every template the simulator can emit.
pub fn all_templates() -> Vec<TemplateKey> {
    let mut out = Vec::new();
    for kind in EffectKind::ALL {
        if kind == EffectKind::NoOp {
            continue;
        }
        out.push(TemplateKey::Action(kind, Outcome::Success));
        out.push(TemplateKey::Action(kind, Outcome::Failure));
    }
    for kind in RED_KINDS {
        out.push(TemplateKey::Action(kind, Outcome::Nullified));
        out.push(TemplateKey::Action(kind, Outcome::Aborted));
    }
    out.push(TemplateKey::Action(EffectKind::LateralMove, Outcome::Rejected));
    out.push(TemplateKey::FirewallDrop);
    out.push(TemplateKey::HoneytokenAlert);
    out.extend(GreenKind::ALL.iter().map(|&g| TemplateKey::Green(g)));
    out
}

type Fields = &'static [(&'static str, &'static str)];

const AUDIT_FAILURE: (&str, &str) = ("Keywords", "Audit Failure");

fn layout(key: TemplateKey) -> (u32, Fields) {
    use EffectKind::*;
    use Outcome::*;
    match key {
        TemplateKey::Action(kind, Nullified) if RED_KINDS.contains(&kind) => (
            5157,
            &[
                ("Direction", "Inbound"),
                ("DestAddress", "$ip"),
                ("FilterName", "Quarantine Block"),
                ("LayerName", "%%14610"),
                ("Operation", "$kind"),
            ],
        ),
        TemplateKey::Action(kind, Aborted) if RED_KINDS.contains(&kind) => (
            4689,
            &[
                ("ProcessName", "C:\\Windows\\System32\\cmd.exe"),
                ("Status", "0xc000013a"),
                ("Operation", "$kind"),
                ("ProcessId", "$id"),
            ],
        ),
        TemplateKey::Action(Scan, Success) => (
            5156,
            &[
                ("Direction", "Inbound"),
                ("DestAddress", "$ip"),
                ("DestPort", "445"),
                ("Protocol", "6"),
                ("FilterRTID", "$id"),
            ],
        ),
        TemplateKey::Action(Scan, _) => (
            5157,
            &[
                ("Direction", "Inbound"),
                ("DestAddress", "$ip"),
                ("DestPort", "135"),
                ("Protocol", "6"),
                ("FilterRTID", "$id"),
            ],
        ),
        TemplateKey::Action(Exploit, Success) => (
            4688,
            &[
                ("NewProcessName", "C:\\Windows\\System32\\cmd.exe"),
                ("ParentProcessName", "C:\\Windows\\System32\\spoolsv.exe"),
                ("TokenElevationType", "%%1936"),
                ("NewProcessId", "$id"),
            ],
        ),
        TemplateKey::Action(Exploit, _) => (
            1000,
            &[
                ("Application", "svchost.exe"),
                ("FaultingModule", "srv2.sys"),
                ("ExceptionCode", "0xc0000005"),
                ("ProcessId", "$id"),
            ],
        ),
        TemplateKey::Action(PrivilegeEscalation, Success) => (
            4672,
            &[
                ("SubjectUserName", "SYSTEM"),
                ("PrivilegeList", "SeDebugPrivilege SeTcbPrivilege SeImpersonatePrivilege"),
                ("SubjectLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(PrivilegeEscalation, _) => (
            4673,
            &[
                ("ObjectServer", "Security"),
                ("PrivilegeList", "SeTcbPrivilege"),
                AUDIT_FAILURE,
                ("SubjectLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(CredentialDump, Success) => (
            4656,
            &[
                ("ObjectName", "\\Device\\HarddiskVolume2\\Windows\\System32\\lsass.exe"),
                ("AccessMask", "0x1010"),
                ("ProcessName", "C:\\Windows\\System32\\rundll32.exe"),
                ("HandleId", "$id"),
            ],
        ),
        TemplateKey::Action(CredentialDump, _) => (
            4656,
            &[
                ("ObjectName", "\\Device\\HarddiskVolume2\\Windows\\System32\\lsass.exe"),
                ("AccessMask", "0x1410"),
                AUDIT_FAILURE,
                ("HandleId", "$id"),
            ],
        ),
        TemplateKey::Action(LateralMove, Success) => (
            4624,
            &[
                ("TargetUserName", "Administrator"),
                ("LogonType", "3"),
                ("AuthenticationPackageName", "Kerberos"),
                ("IpAddress", "$ip"),
                ("TargetLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(LateralMove, Rejected) => (
            4625,
            &[
                ("TargetUserName", "Administrator"),
                ("LogonType", "3"),
                ("Status", "0xc000006d"),
                ("SubStatus", "0xc000006a"),
                ("IpAddress", "$ip"),
            ],
        ),
        TemplateKey::Action(LateralMove, _) => (
            4625,
            &[
                ("TargetUserName", "Administrator"),
                ("LogonType", "3"),
                ("Status", "0xc000006d"),
                ("SubStatus", "0xc0000133"),
                ("IpAddress", "$ip"),
            ],
        ),
        TemplateKey::Action(Impact, Success) => (
            4663,
            &[
                ("ObjectName", "C:\\Users\\Public\\staging.7z"),
                ("AccessMask", "0x2"),
                ("ProcessName", "C:\\ProgramData\\rclone.exe"),
                ("HandleId", "$id"),
            ],
        ),
        TemplateKey::Action(Impact, _) => (
            4656,
            &[
                ("ObjectName", "C:\\Users\\Public\\staging.7z"),
                ("AccessMask", "0x2"),
                AUDIT_FAILURE,
                ("HandleId", "$id"),
            ],
        ),
        TemplateKey::Action(Isolate, Success) => (
            4946,
            &[
                ("ProfileChanged", "All"),
                ("RuleName", "SOC host quarantine"),
                ("RuleId", "$id"),
            ],
        ),
        TemplateKey::Action(Isolate, _) => (
            4957,
            &[("RuleName", "SOC host quarantine"), ("ErrorCode", "0x80070005")],
        ),
        TemplateKey::Action(Reconnect, Success) => (
            4948,
            &[
                ("ProfileChanged", "All"),
                ("RuleName", "SOC host quarantine"),
                ("RuleId", "$id"),
            ],
        ),
        TemplateKey::Action(Reconnect, _) => (
            4957,
            &[("RuleName", "SOC host release"), ("ErrorCode", "0x80070005")],
        ),
        TemplateKey::Action(Cleanup, Success) => (
            1117,
            &[
                ("ThreatName", "Behavior:Win32/Remediation"),
                ("ActionName", "Remove"),
                ("ProcessId", "$id"),
            ],
        ),
        TemplateKey::Action(Cleanup, _) => (
            1118,
            &[("ActionName", "Remove"), ("ErrorCode", "0x80508023")],
        ),
        TemplateKey::Action(TokenRotate, Success) => (
            4724,
            &[
                ("TargetUserName", "krbtgt"),
                ("TargetDomainName", "NETFORGE"),
                ("SubjectLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(TokenRotate, _) => (
            4724,
            &[("TargetUserName", "krbtgt"), ("TargetDomainName", "NETFORGE"), AUDIT_FAILURE],
        ),
        TemplateKey::Action(Honeytoken, Success) => (
            4720,
            &[
                ("TargetUserName", "svc_sql_admin"),
                ("UserAccountControl", "%%2080"),
                ("SubjectLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(Honeytoken, _) => (
            4720,
            &[("TargetUserName", "svc_sql_admin"), AUDIT_FAILURE],
        ),
        TemplateKey::Action(Patch, Success) => (
            19,
            &[
                ("updateTitle", "Security Update for Windows (KB5005565)"),
                ("updateGuid", "$id"),
            ],
        ),
        TemplateKey::Action(Patch, _) => (
            20,
            &[
                ("updateTitle", "Security Update for Windows (KB5005565)"),
                ("errorCode", "0x80240022"),
            ],
        ),
        TemplateKey::Action(Analyze, Success) => (
            4104,
            &[
                ("ScriptBlockText", "Get-Process | Get-FileHash"),
                ("Finding", "$detail"),
                ("ScriptBlockId", "$id"),
            ],
        ),
        TemplateKey::Action(Analyze, _) => (
            4105,
            &[("ScriptBlockId", "$id"), ("Status", "timeout")],
        ),
        TemplateKey::Action(CredentialReset, Success) => (
            4724,
            &[
                ("TargetUserName", "Administrator"),
                ("TargetDomainName", "$host"),
                ("SubjectLogonId", "$id"),
            ],
        ),
        TemplateKey::Action(CredentialReset, _) => (
            4724,
            &[("TargetUserName", "Administrator"), ("TargetDomainName", "$host"), AUDIT_FAILURE],
        ),
        TemplateKey::Action(_, _) => (
            4662,
            &[("Operation", "$kind"), ("Status", "$outcome")],
        ),
        TemplateKey::FirewallDrop => (
            5157,
            &[
                ("Direction", "Inbound"),
                ("DestAddress", "$ip"),
                ("DestPort", "88"),
                ("FilterName", "ZTNA identity gate"),
                ("FilterRTID", "$id"),
            ],
        ),
        TemplateKey::HoneytokenAlert => (
            4769,
            &[
                ("TargetUserName", "svc_sql_admin"),
                ("ServiceName", "krbtgt"),
                ("TicketEncryptionType", "0x17"),
                ("IpAddress", "$ip"),
                ("Status", "0x0"),
            ],
        ),
        TemplateKey::Green(g) => match g {
            GreenKind::Logon => (
                4624,
                &[
                    ("TargetUserName", "$user"),
                    ("LogonType", "2"),
                    ("AuthenticationPackageName", "Negotiate"),
                    ("IpAddress", "$ip"),
                    ("TargetLogonId", "$id"),
                ],
            ),
            GreenKind::FailedLogon => (
                4625,
                &[
                    ("TargetUserName", "$user"),
                    ("LogonType", "2"),
                    ("Status", "0xc000006d"),
                    ("SubStatus", "0xc000006a"),
                    ("IpAddress", "$ip"),
                ],
            ),
            GreenKind::FileAccess => (
                4663,
                &[
                    ("ObjectName", "C:\\Shares\\Finance\\Q3-report.xlsx"),
                    ("AccessMask", "0x1"),
                    ("ProcessName", "C:\\Program Files\\Microsoft Office\\EXCEL.EXE"),
                    ("HandleId", "$id"),
                ],
            ),
            GreenKind::ProcessStart => (
                4688,
                &[
                    ("NewProcessName", "C:\\Program Files\\Google\\Chrome\\chrome.exe"),
                    ("ParentProcessName", "C:\\Windows\\explorer.exe"),
                    ("TokenElevationType", "%%1938"),
                    ("NewProcessId", "$id"),
                ],
            ),
            GreenKind::Connection => (
                5156,
                &[
                    ("Direction", "Outbound"),
                    ("DestAddress", "$ip"),
                    ("DestPort", "443"),
                    ("Protocol", "6"),
                    ("FilterRTID", "$id"),
                ],
            ),
            GreenKind::Logoff => (
                4634,
                &[("TargetUserName", "$user"), ("LogonType", "2"), ("TargetLogonId", "$id")],
            ),
            GreenKind::ServiceTicket => (
                4769,
                &[
                    ("TargetUserName", "$user"),
                    ("ServiceName", "cifs"),
                    ("TicketEncryptionType", "0x12"),
                    ("IpAddress", "$ip"),
                    ("Status", "0x0"),
                ],
            ),
            GreenKind::DecoyTraffic => (
                5156,
                &[
                    ("Direction", "Inbound"),
                    ("DestAddress", "$ip"),
                    ("DestPort", "8080"),
                    ("Application", "honeypot-listener"),
                    ("FilterRTID", "$id"),
                ],
            ),
        },
    }
}

/// ISO-8601 wall-clock time of a simulation tick.
pub fn timestamp(tick: f64) -> String {
    let ms = EPOCH_MS + (tick * MS_PER_TICK).round() as i64;
    match DateTime::from_timestamp_millis(ms) {
        Some(t) => t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
        None => "1970-01-01T00:00:00.000Z".to_string(),
    }
}

/// Renders the fixed Windows-Event-shaped XML document. Each element sits on
/// its own line.
pub fn render_xml(event_id: u32, tick: f64, computer: &str, data: &[(&str, String)]) -> String {
    let mut s = String::with_capacity(256 + 48 * data.len());
    let _ = write!(
        s,
        "<Event>\n<System>\n<EventID>{event_id}</EventID>\n<TimeCreated SystemTime=\"{}\"/>\n<Computer>{computer}</Computer>\n</System>\n<EventData>\n",
        timestamp(tick)
    );
    for (name, value) in data {
        let _ = writeln!(s, "<Data Name=\"{name}\">{value}</Data>");
    }
    s.push_str("</EventData>\n</Event>");
    s
}

/// Expands a draft into a full record. Randomized fields (handles, logon
/// ids, benign user names) come from `rng`, so identical inputs and rng
/// state give byte-identical XML.
pub fn synthesize_log<R: Rng + ?Sized>(draft: &LogDraft, tick: f64, topology: &Topology, rng: &mut R) -> LogRecord {
    let node = &topology.nodes[draft.node];
    let (event_id, fields) = layout(draft.template);
    let data: Vec<(&str, String)> = fields
        .iter()
        .map(|&(name, value)| {
            let v = match value {
                "$ip" => node.address.to_string(),
                "$host" => node.name.clone(),
                "$id" => format!("0x{:08x}", rng.random::<u32>()),
                "$user" => GREEN_USERS[rng.random_range(0..GREEN_USERS.len())].to_string(),
                "$detail" => draft.detail.unwrap_or("none").to_string(),
                "$kind" => match draft.template {
                    TemplateKey::Action(k, _) => k.as_str().to_string(),
                    _ => "system".to_string(),
                },
                "$outcome" => match draft.template {
                    TemplateKey::Action(_, o) => o.as_str().to_string(),
                    _ => "none".to_string(),
                },
                literal => literal.to_string(),
            };
            (name, v)
        })
        .collect();
    let computer = format!("{}.netforge.local", node.name);
    LogRecord {
        tick,
        node: draft.node,
        zone: node.zone,
        event_id,
        xml_text: render_xml(event_id, tick, &computer, &data),
        origin: draft.template.origin(),
    }
}
