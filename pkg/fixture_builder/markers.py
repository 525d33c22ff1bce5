"""Bytecode emitted for each CodeMarker: one static method per marker."""

from .dex_writer import (
    Const,
    ConstClass,
    ConstString,
    Invoke,
    MethodDef,
    MethodKey,
    MoveResultObject,
    NewInstance,
    ReturnVoid,
)
from .profiles import CodeMarker

STRING = 'Ljava/lang/String;'
OBJECT = 'Ljava/lang/Object;'
CONTEXT = 'Landroid/content/Context;'
INTENT = 'Landroid/content/Intent;'
COMPONENT_NAME = 'Landroid/content/ComponentName;'
FILE = 'Ljava/io/File;'
WEBVIEW = 'Landroid/webkit/WebView;'
WEB_SETTINGS = 'Landroid/webkit/WebSettings;'
PACKAGE_MANAGER = 'Landroid/content/pm/PackageManager;'
PACKAGE_INFO = 'Landroid/content/pm/PackageInfo;'
SIGNATURE = 'Landroid/content/pm/Signature;'
RUNTIME = 'Ljava/lang/Runtime;'
PROCESS = 'Ljava/lang/Process;'
WINDOW = 'Landroid/view/Window;'
TELEPHONY = 'Landroid/telephony/TelephonyManager;'

GET_SIGNATURES = 0x40
FLAG_SECURE = 0x2000

START_SERVICE = MethodKey(CONTEXT, 'startService', (INTENT,), COMPONENT_NAME)
FILE_INIT = MethodKey(FILE, '<init>', (STRING,))
FILE_DELETE = MethodKey(FILE, 'delete', (), 'Z')


def _toggle(method, enabled):
    # Receiver first so the boolean is the constant nearest the call.
    return (
        Const(0, 0),
        Const(1, 1 if enabled else 0),
        Invoke('virtual', MethodKey(WEB_SETTINGS, method, ('Z',)), (0, 1)),
        ReturnVoid(),
    )


def _delete(path):
    return (
        NewInstance(0, FILE),
        ConstString(1, path),
        Invoke('direct', FILE_INIT, (0, 1)),
        Invoke('virtual', FILE_DELETE, (0,)),
    )


def marker_method(marker, package_name, class_name):
    """The MethodDef that plants one marker in the fixture's code."""
    marker = CodeMarker(marker)

    if marker == CodeMarker.IMPLICIT_SERVICE_INTENT:
        return MethodDef('startSyncService', (
            NewInstance(0, INTENT),
            ConstString(1, f'{package_name}.action.SYNC'),
            Invoke('direct', MethodKey(INTENT, '<init>', (STRING,)), (0, 1)),
            Const(2, 0),
            Invoke('virtual', START_SERVICE, (2, 0)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.EXPLICIT_SERVICE_INTENT:
        return MethodDef('startBoundService', (
            NewInstance(0, INTENT),
            Const(1, 0),
            ConstClass(2, f'{class_name[:-1]}$SyncService;'),
            Invoke('direct', MethodKey(INTENT, '<init>', (CONTEXT, 'Ljava/lang/Class;')), (0, 1, 2)),
            Invoke('virtual', START_SERVICE, (1, 0)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.ADD_JAVASCRIPT_INTERFACE:
        return MethodDef('exposeBridge', (
            Const(0, 0),
            Const(1, 0),
            ConstString(2, 'bridge'),
            Invoke('virtual', MethodKey(WEBVIEW, 'addJavascriptInterface', (OBJECT, STRING)), (0, 1, 2)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.GET_DEVICE_ID:
        return MethodDef('readDeviceId', (
            Const(0, 0),
            Invoke('virtual', MethodKey(TELEPHONY, 'getDeviceId', (), STRING), (0,)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.FILE_ACCESS_ENABLED:
        return MethodDef('enableFileAccess', _toggle('setAllowFileAccess', True))
    if marker == CodeMarker.FILE_ACCESS_DISABLED:
        return MethodDef('disableFileAccess', _toggle('setAllowFileAccess', False))
    if marker == CodeMarker.JAVASCRIPT_ENABLED:
        return MethodDef('enableJavaScript', _toggle('setJavaScriptEnabled', True))
    if marker == CodeMarker.JAVASCRIPT_DISABLED:
        return MethodDef('disableJavaScript', _toggle('setJavaScriptEnabled', False))
    if marker == CodeMarker.ROOT_CHECK_STRINGS:
        return MethodDef('detectRoot', (
            ConstString(0, '/system/xbin/su'),
            ConstString(1, 'test-keys'),
            NewInstance(2, FILE),
            Invoke('direct', FILE_INIT, (2, 0)),
            Invoke('virtual', MethodKey(FILE, 'exists', (), 'Z'), (2,)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.RUNTIME_EXEC:
        return MethodDef('readMounts', (
            Invoke('static', MethodKey(RUNTIME, 'getRuntime', (), RUNTIME)),
            MoveResultObject(0),
            ConstString(1, 'mount'),
            Invoke('virtual', MethodKey(RUNTIME, 'exec', (STRING,), PROCESS), (0, 1)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.SIGNATURE_CHECK:
        return MethodDef('verifySignature', (
            Const(0, 0),
            ConstString(1, package_name),
            Const(2, GET_SIGNATURES),
            Invoke('virtual', MethodKey(PACKAGE_MANAGER, 'getPackageInfo', (STRING, 'I'), PACKAGE_INFO), (0, 1, 2)),
            ConstClass(3, SIGNATURE),
            ReturnVoid(),
        ))
    if marker == CodeMarker.FLAG_SECURE:
        return MethodDef('secureWindow', (
            Const(0, 0),
            Const(1, FLAG_SECURE),
            Invoke('virtual', MethodKey(WINDOW, 'addFlags', ('I',)), (0, 1)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.INSTALLER_CHECK:
        return MethodDef('checkInstaller', (
            Const(0, 0),
            ConstString(1, package_name),
            Invoke('virtual', MethodKey(PACKAGE_MANAGER, 'getInstallerPackageName', (STRING,), STRING), (0, 1)),
            ReturnVoid(),
        ))
    if marker == CodeMarker.FILE_DELETE:
        return MethodDef('wipeCache', _delete('cache.db') + (ReturnVoid(),))
    if marker == CodeMarker.FILE_DELETE_REPEATED:
        return MethodDef('wipeSession', _delete('session.db') + _delete('session.db-journal') + (ReturnVoid(),))
    raise ValueError(f'no bytecode template for {marker}')
